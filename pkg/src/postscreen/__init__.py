"""postscreen: hostility and fake-news screening for micro-blog posts.

The package trains and serves linear classifiers over tweet-cleaning
pipelines, lexicon/metadata features, TF-IDF and embedding-average text
blocks, with ensembling, pseudo-labelling, and a weighted-F1 evaluation
harness. A FastAPI service wraps the library; the CLI is a thin client
of that service.
"""

__version__ = "0.1.0"

from .corpus import Corpus, LabeledPost, load_dataset, split_counts  # noqa: F401
from .errors import ConfigError, DataError, PostscreenError  # noqa: F401
from .preprocess import CleanDoc, TextCleaner, clean  # noqa: F401
