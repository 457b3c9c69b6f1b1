"""Normal and Poisson polynomial regression of well production on thermocouple temperatures."""

__version__ = "0.1.0"
