"""Synthesis of contact-aided compliant mechanisms that trace kinked output paths.

Typical use goes through a job configuration::

    from ccmsynth import config, search
    cfg = config.shipped("toy_single_kink")
    result = search.run(search.search_config_from(cfg), search.problem_from_config(cfg),
                        v0=cfg.design_vector())
"""
from .errors import CCMError

__version__ = "0.1.0"

__all__ = ["CCMError", "__version__"]
