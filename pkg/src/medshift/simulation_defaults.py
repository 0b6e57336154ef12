"""Generating parameters for the two built-in simulation settings.

Values follow the published study designs for the two HIV persistence
measures: mediator mean model, true-mediator SD, external
measurement-error SD, probit outcome coefficients, and common-cause mix.
The assay limits are the operative detection limits on the log10 scale
(92 copies per million cells for the cell-associated measure; 1 copy/ml,
i.e. 0 on the log10 scale, for the plasma measure); both are overridable
since pooled studies mix limits.
"""

from math import log10

CARNA_DEFAULTS = {
    "label": "carna",
    "alpha": (1.57, 0.88),
    "sigma_m": 0.58,
    "sigma_u": 0.29,
    "beta": (1.36, -1.11, 0.84),
    "p_c1": 0.69,
    "assay_limit": log10(92.0),
}

SCA_DEFAULTS = {
    "label": "sca",
    "alpha": (-0.02, 0.10),
    "sigma_m": 0.65,
    "sigma_u": 0.47,
    "beta": (-0.22, -0.34, -0.16),
    "p_c1": 0.72,
    "assay_limit": log10(1.0),
}
