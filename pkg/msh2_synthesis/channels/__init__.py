from .delay_channel import DelayChannel
from .erasure_channel import ErasureChannel
from .custom_channel import CustomChannel
