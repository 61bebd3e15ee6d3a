"""Stable laws, Fisher information and normalized sums on uniform grids."""
from .errors import (ExtremalLaw, FitFailed, GridMismatch, NonFiniteIntegrand, NotADensity,
                     NotIntegrable, ParseError, StableFisherError, TailUnbounded,
                     ValidationError)
from .grid import (CharFnGrid, DensityGrid, Grid, TailModel, charfn_to_density,
                   charfn_to_density_derivative, convolve, density_to_charfn, quadrature,
                   tv_norm, uniform_density)
from .info import (InequalityReport, fisher, information_inequalities, make_p2_pair,
                   p2_class_checks, prop22_bounds, relative_entropy, relative_fisher,
                   three_convolution_fisher, tv_and_charfn_bounds)
from .stable import StableDensity, StableLaw, score_bounds, stable_charfn, stable_density
from .sums import (ConvergenceRow, NormalizingSeq, SourceModel, calibrate_limit,
                   charfn_envelope_check, convergence_experiment, local_limit_metrics,
                   zn_density)
from .decomp import (Truncation, binomial_reconstruction, fisher_boundedness_witness, truncate,
                     verify_cor73, verify_lemma71, verify_lemma72)
from .tolerances import DEFAULT_TOLERANCES

__version__ = "0.1.0"
