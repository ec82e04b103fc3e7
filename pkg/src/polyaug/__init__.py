"""Back-translation data augmentation for Mandarin polyphone disambiguation."""

from .kernels import BACKEND
from .lexicon import Lexicon, LexiconError, Syllable, load_lexicon

__version__ = "0.1.0"

__all__ = ["BACKEND", "Lexicon", "LexiconError", "Syllable", "load_lexicon", "__version__"]
