"""Entity typing from descriptive sentences.

Two-channel convolutional classifier over entity names and description
sentences, trained from scratch, with K-means clustering of the pooled
representations used for noise filtering, re-sampling, and confidence
grading of predictions.
"""

__version__ = "0.1.0"
