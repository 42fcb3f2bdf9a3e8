from .baselines import BaselineFit, fit_apl, fit_mel, fit_sis
from .config import ScreenConfig, SolverConfig, SprinterConfig
from .context import Context
from .core import Stopping, error_boundary
from .families import Family, get_family
from .ordinal import (
    OrdinalSprinterModel,
    fit_ordinalnet,
    ordinal_score_info,
    sprinter_ordinal,
)
from .penalized import GlmFit, cv_fit, fit_path
from .pipeline import (
    InteractionModel,
    SprinterModel,
    sprinter_fit,
    sprinter_predict,
)
from .screen import ScreenResult, screen

__all__ = (
    "BaselineFit",
    "Context",
    "Family",
    "GlmFit",
    "InteractionModel",
    "OrdinalSprinterModel",
    "ScreenConfig",
    "ScreenResult",
    "SolverConfig",
    "SprinterConfig",
    "SprinterModel",
    "Stopping",
    "cv_fit",
    "error_boundary",
    "fit_apl",
    "fit_mel",
    "fit_ordinalnet",
    "fit_path",
    "fit_sis",
    "get_family",
    "ordinal_score_info",
    "screen",
    "sprinter_fit",
    "sprinter_ordinal",
    "sprinter_predict",
)
