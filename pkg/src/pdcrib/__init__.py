"""Design toolkit for type-II parametric down-conversion in thin-film LiNbO3 rib waveguides."""

__version__ = "0.1.0"
