"""S-parameter curve fitting with an untrained convolutional prior.

Thin wrapper over the native extension; see the function docstrings on
``spfit._core`` for the full surface.
"""

from ._core import (  # noqa: F401
    __version__,
    cel_forward,
    fit_dip,
    flatten,
    generate,
    input_noise_variance,
    make_latent,
    network_config,
    parse_touchstone,
    psnr,
    spearman,
    subsample,
    subsample_adjoint,
    third_diff_penalty,
    unflatten,
    uniform_indices,
    vf_eval,
    vf_fit,
    write_touchstone,
)
