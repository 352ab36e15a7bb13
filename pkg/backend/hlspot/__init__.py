"""HLSpot - spotter hiper-local de texto em mapas históricos"""

__version__ = "1.0.0"
