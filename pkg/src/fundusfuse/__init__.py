"""Fundus image grading via fused handcrafted and deep features.

Pipeline stages: ingest a class-directory dataset, segment each image,
extract five handcrafted descriptor blocks plus a deep embedding, fuse and
standardize, then train and score classical classifiers over a
backbone-by-classifier evaluation grid.
"""

__version__ = "0.1.0"
