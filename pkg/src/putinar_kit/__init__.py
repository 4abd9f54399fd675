"""Sum-of-squares certificates, Lasserre relaxations and pseudo-moment tools on compact semialgebraic sets."""
from .certificate import certify, fekete_lukacs, lift_echelon_term, box_to_ball, verify_certificate
from .echelon import build_echelon, build_spline
from .gram import Certificate
from .moments import PseudoMomentSeq, hausdorff_estimate
from .poly import MultiPoly, UniPoly, BoxNormEstimate, evaluate, gradient, compose_univariate, max_norm_box, markov_gradient_check
from .semialgebraic import Problem, normalize
from .sos import lasserre, sos_feasibility

__version__ = "0.1.0"
