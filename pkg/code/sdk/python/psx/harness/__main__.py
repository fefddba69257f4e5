"""Main for the psx command line."""

from psx.harness import cli


if __name__ == '__main__':
    cli.run()
