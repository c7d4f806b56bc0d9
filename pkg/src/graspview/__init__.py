"""Active-perception grasp planning: view sampling, render-and-score NBV
selection, metric scale recovery, object extraction and grasp mapping."""

__version__ = "0.1.0"
