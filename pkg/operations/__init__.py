"""Operations for the cell-free ISAC AP deployment optimizer"""

__version__ = "0.1.0"
