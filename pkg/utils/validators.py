import math
from typing import Any, Dict, List, Optional


def validate_k_sweep(text: str) -> Dict[str, Any]:
    """
    Validate a scale sweep given as lo:hi:step.

    Args:
        text: Sweep specification, e.g. "0.5:1.5:0.5"

    Returns:
        Dictionary with validation result and the ascending scale list
    """
    parts = (text or "").split(":")
    if len(parts) != 3:
        return {
            "valid": False,
            "error": "k-sweep must have the form lo:hi:step"
        }

    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        return {
            "valid": False,
            "error": f"k-sweep contains a non-numeric value: {text}"
        }

    if not all(math.isfinite(v) for v in (lo, hi, step)):
        return {
            "valid": False,
            "error": "k-sweep values must be finite"
        }

    if lo <= 0 or step <= 0:
        return {
            "valid": False,
            "error": "k-sweep needs lo > 0 and step > 0"
        }

    if hi < lo:
        return {
            "valid": False,
            "error": "k-sweep needs hi >= lo"
        }

    # index-based so repeated addition cannot drift past hi
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    ks = [round(lo + i * step, 12) for i in range(count)]

    return {
        "valid": True,
        "ks": ks
    }


def validate_noise_ratio(value: float) -> Dict[str, Any]:
    """Noise ratio must lie strictly between 0 and 1."""
    if value is None or not 0 < value < 1:
        return {
            "valid": False,
            "error": "noise ratio must be strictly between 0 and 1"
        }
    return {"valid": True, "noise_ratio": float(value)}


def validate_seed_list(seeds: Optional[List[int]], replications: Optional[int] = None) -> Dict[str, Any]:
    """
    Validate an explicit seed list against the replication count.

    Args:
        seeds: Seeds to run, or None when a base seed is used
        replications: Replication count, if given

    Returns:
        Dictionary with validation result
    """
    if seeds is None:
        return {"valid": True, "seeds": None}

    if len(seeds) == 0:
        return {
            "valid": False,
            "error": "seed list must not be empty"
        }

    if any(not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2 ** 64 for s in seeds):
        return {
            "valid": False,
            "error": "seeds must be integers in [0, 2^64)"
        }

    if replications is not None and len(seeds) != replications:
        return {
            "valid": False,
            "error": f"seed list has {len(seeds)} entries but replications is {replications}"
        }

    return {"valid": True, "seeds": list(seeds)}


def validate_fraction(value: Optional[float], name: str) -> Dict[str, Any]:
    """Optional fraction in (0, 1]."""
    if value is None:
        return {"valid": True, name: None}
    if not 0 < value <= 1:
        return {
            "valid": False,
            "error": f"{name} must be in (0, 1]"
        }
    return {"valid": True, name: float(value)}
