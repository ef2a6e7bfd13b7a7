"""
Coreset Regression - weighted coresets for lp, relu, logistic and probit
regression built in one pass over a turnstile stream.
"""

__version__ = "0.1.0"
