"""Competition-momentum analytics for two-player racket sports.

The package quantifies each player's competitive potential over a match
from point-by-point data, marks situation turning points where the two
curves cross, and trains imbalance-aware tree ensembles to predict the
next turn. It can run as a batch pipeline (CLI) or as a live scoring
service (HTTP).
"""

__version__ = "0.1.0"
