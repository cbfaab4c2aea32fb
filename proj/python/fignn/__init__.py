"""Python access to the FIGNN surrogate: graphs, models and the CLI."""

import json

from ._fignn import FignnError, Graph, Model, mask_size, run, topk

__all__ = ["FignnError", "Graph", "Model", "mask_size", "run", "topk", "model", "cli"]


def model(**config):
    """Builds a freshly initialised model; keyword arguments override config fields."""
    return Model(json.dumps(config))


def cli(*args):
    """Runs a CLI subcommand and returns its parsed JSON output.

    Raises FignnError with the reported message on a non-zero exit.
    """
    code, out, err = run([str(a) for a in args])
    if code != 0:
        raise FignnError(err.strip())
    return json.loads(out)
