"""Risk-averse two-stage stochastic semidefinite programs."""

import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
