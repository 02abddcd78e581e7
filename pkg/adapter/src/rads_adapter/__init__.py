"""Score pretrained sequence classifiers with dropout active at inference
and emit the JSON-lines score-file format consumed by the selection toolkit."""

__version__ = "0.1.0"
