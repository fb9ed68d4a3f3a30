"""Linear SDEs driven by a pair of subordinators: path simulation, exact
moments, Monte Carlo estimators and a CLI."""

__version__ = "0.1.0"
