from singshift.voc.discriminators import DiscOutput, Discriminators
from singshift.voc.generator import Generator, VocConfig, VocError

__all__ = ["DiscOutput", "Discriminators", "Generator", "VocConfig", "VocError"]
