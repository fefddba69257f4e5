"""Main for the toy model server."""

from collections.abc import Sequence

from absl import app, flags
from psx.sdk import blackbox
from roles.toy_model_server import server


FLAGS = flags.FLAGS

flags.DEFINE_integer("port", 8090, "Port to listen on.")
flags.DEFINE_integer("class_count", 10, "Classes of the toy classifier.")
flags.DEFINE_integer("seed", 0, "Seed of the toy classifier weights.")


def main(argv: Sequence[str]) -> None:
  classifier = blackbox.ToyClassifier.seeded(FLAGS.class_count, FLAGS.seed)
  server.create_app(classifier).run(host="127.0.0.1", port=FLAGS.port)


if __name__ == "__main__":
  app.run(main)
