from .tensor import Tensor, Tape, constant
from .gradcheck import grad_check
from .init import seeded_init
