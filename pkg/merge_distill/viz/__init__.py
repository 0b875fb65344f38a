from .plotloss import lplot

__all__ = ['lplot']
