"""A flask app serving the toy classifier over the psx model protocol.

``POST /predict`` takes ``{"image_png_b64": ...}`` and answers
``{"probs": [...]}``. Malformed requests get HTTP 400.
"""

import logging

import flask
from psx.models.prediction import PredictRequest, PredictResponse
from psx.sdk import blackbox, utils
from psx.sdk.errors import PsxError
from pydantic import ValidationError


_logger = logging.getLogger(__name__)


def create_app(classifier: blackbox.ToyClassifier) -> flask.Flask:
  """Builds the app around ``classifier``."""
  app = flask.Flask(__name__)

  @app.post("/predict")
  def predict():
    try:
      request = PredictRequest.model_validate(flask.request.get_json(force=True))
      image = utils.image_from_b64_png(request.image_png_b64)
      probs = classifier(image)
    except (ValidationError, PsxError) as e:
      _logger.warning("rejected predict request: %s", e)
      return flask.jsonify({"error": str(e)}), 400
    return flask.jsonify(PredictResponse(probs=probs.probs.tolist()).model_dump())

  @app.get("/healthz")
  def healthz():
    return flask.jsonify({"class_count": classifier.class_count})

  return app
