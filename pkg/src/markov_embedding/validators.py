"""
配置验证工具
Checks for experiment config files and model parameters.
"""
from __future__ import annotations

from typing import Any, Dict, List, Tuple

MODEL_KINDS = ("finite", "jc", "spin-boson")
RATE_NORMS = ("total", "per-element")
DMD_VARIANTS = ("projected", "literal")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _is_number(value: Any) -> bool:
    # PyYAML reads "1e-3" (no dot) as a string
    if isinstance(value, str):
        try:
            float(value)
        except ValueError:
            return False
        return True
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _num(value: Any) -> float:
    return float(value)


def validate_positive(value: Any, name: str) -> Tuple[bool, str]:
    """
    验证正数

    Returns:
        (is_valid, error_message)
    """
    if not _is_number(value):
        return False, f"'{name}' must be a number, got {value!r}"
    if _num(value) <= 0:
        return False, f"'{name}' must be positive, got {value}"
    return True, ""


def validate_non_negative(value: Any, name: str) -> Tuple[bool, str]:
    if not _is_number(value):
        return False, f"'{name}' must be a number, got {value!r}"
    if _num(value) < 0:
        return False, f"'{name}' must be non-negative, got {value}"
    return True, ""


def validate_int_at_least(value: Any, name: str, minimum: int) -> Tuple[bool, str]:
    """验证整数下限"""
    if not isinstance(value, int) or isinstance(value, bool):
        return False, f"'{name}' must be an integer, got {value!r}"
    if value < minimum:
        return False, f"'{name}' must be at least {minimum}, got {value}"
    return True, ""


def validate_probability(value: Any, name: str) -> Tuple[bool, str]:
    """验证 (0, 1] 区间内的概率值"""
    if not _is_number(value):
        return False, f"'{name}' must be a number, got {value!r}"
    if not 0 < _num(value) <= 1:
        return False, f"'{name}' must lie in (0, 1], got {value}"
    return True, ""


def parse_complex(text: str) -> complex:
    """
    Parse a complex amplitude written as ``"re,im"`` or as a Python literal
    such as ``"1.1+0.3j"``.
    """
    raw = str(text).strip()
    if "," in raw:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected \"re,im\", got {text!r}")
        return complex(float(parts[0]), float(parts[1]))
    try:
        return complex(raw.replace(" ", ""))
    except ValueError:
        raise ValueError(f"not a complex number: {text!r}") from None


def validate_complex(value: Any, name: str) -> Tuple[bool, str]:
    if isinstance(value, (list, tuple)):
        if len(value) == 2 and all(_is_number(v) for v in value):
            return True, ""
        return False, f"'{name}' must be [re, im], got {value!r}"
    if _is_number(value) or isinstance(value, complex):
        return True, ""
    if isinstance(value, str):
        try:
            parse_complex(value)
        except ValueError as exc:
            return False, f"'{name}': {exc}"
        return True, ""
    return False, f"'{name}' must be a complex number, got {value!r}"


def validate_model_kind(kind: Any) -> Tuple[bool, str]:
    if kind not in MODEL_KINDS:
        return False, f"model kind must be one of {', '.join(MODEL_KINDS)}: {kind!r}"
    return True, ""


def validate_model_params(kind: str, params: Dict[str, Any]) -> List[str]:
    """
    验证模型参数

    Returns:
        错误消息列表（空列表表示无错误）
    """
    errors: List[str] = []
    ok, msg = validate_model_kind(kind)
    if not ok:
        return [msg]

    def check(result: Tuple[bool, str]) -> None:
        if not result[0]:
            errors.append(result[1])

    if "tau" in params:
        check(validate_positive(params["tau"], "tau"))

    if kind == "finite":
        if "d_E" not in params:
            errors.append("'d_E' is required for the finite model")
        else:
            check(validate_int_at_least(params["d_E"], "d_E", 2))
        if "d" in params:
            check(validate_int_at_least(params["d"], "d", 2))
        for key in ("a_unit", "a_diss"):
            if key in params:
                check(validate_non_negative(params[key], key))
        if "rate_norm" in params and params["rate_norm"] not in RATE_NORMS:
            errors.append(f"'rate_norm' must be one of {', '.join(RATE_NORMS)}: {params['rate_norm']!r}")
    elif kind == "jc":
        for key in ("gamma", "g"):
            if key in params:
                check(validate_non_negative(params[key], key))
        if "n_levels" in params:
            check(validate_int_at_least(params["n_levels"], "n_levels", 0))
        if "alpha" in params:
            check(validate_complex(params["alpha"], "alpha"))
    else:
        for key in ("gamma", "omega0"):
            if key in params:
                check(validate_positive(params[key], key))
        if "n_levels" in params:
            check(validate_int_at_least(params["n_levels"], "n_levels", 2))
        if "check_convergence" in params and not isinstance(params["check_convergence"], bool):
            errors.append(f"'check_convergence' must be true or false, got {params['check_convergence']!r}")
        if "convergence_tol" in params:
            check(validate_positive(params["convergence_tol"], "convergence_tol"))
        gamma, omega0 = params.get("gamma", 0.05), params.get("omega0", 1.0)
        if _is_number(gamma) and _is_number(omega0) and _num(omega0) <= _num(gamma) / 2:
            errors.append(f"spin-boson bath must be underdamped: omega0={omega0} <= gamma/2={_num(gamma) / 2}")
    return errors


def validate_config_basic(config_dict: Any) -> List[str]:
    """
    验证配置的基本结构

    Returns:
        错误消息列表（空列表表示无错误）
    """
    errors: List[str] = []

    if not isinstance(config_dict, dict):
        errors.append("config root must be a YAML mapping")
        return errors

    model = config_dict.get("model")
    if model is not None:
        if not isinstance(model, dict):
            errors.append("'model' must be a mapping")
        else:
            params = {k: v for k, v in model.items() if k != "kind"}
            errors.extend(f"model: {m}" for m in validate_model_params(model.get("kind", "finite"), params))

    dataset = config_dict.get("dataset") or {}
    if not isinstance(dataset, dict):
        errors.append("'dataset' must be a mapping")
    else:
        for key, minimum in (("L", 1), ("T", 2)):
            if key in dataset:
                ok, msg = validate_int_at_least(dataset[key], f"dataset.{key}", minimum)
                if not ok:
                    errors.append(msg)
        if "sigma" in dataset:
            ok, msg = validate_non_negative(dataset["sigma"], "dataset.sigma")
            if not ok:
                errors.append(msg)

    fit = config_dict.get("fit") or {}
    if not isinstance(fit, dict):
        errors.append("'fit' must be a mapping")
    else:
        if "K" in fit:
            ok, msg = validate_int_at_least(fit["K"], "fit.K", 1)
            if not ok:
                errors.append(msg)
        if "sigma" in fit:
            ok, msg = validate_non_negative(fit["sigma"], "fit.sigma")
            if not ok:
                errors.append(msg)
        if "floor" in fit:
            ok, msg = validate_probability(fit["floor"], "fit.floor")
            if not ok:
                errors.append(msg)
        variant = fit.get("variant")
        if variant is not None and variant not in DMD_VARIANTS:
            errors.append(f"'fit.variant' must be one of {', '.join(DMD_VARIANTS)}: {variant!r}")

    sweep = config_dict.get("sweep") or {}
    if not isinstance(sweep, dict):
        errors.append("'sweep' must be a mapping")
    else:
        seeds = sweep.get("seeds")
        if seeds is not None and (
            not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)
        ):
            errors.append("'sweep.seeds' must be a non-empty list of integers")
        if "workers" in sweep:
            ok, msg = validate_int_at_least(sweep["workers"], "sweep.workers", 1)
            if not ok:
                errors.append(msg)

    logging_raw = config_dict.get("logging") or {}
    level = logging_raw.get("level") if isinstance(logging_raw, dict) else None
    if level is not None and str(level).upper() not in LOG_LEVELS:
        errors.append(f"'logging.level' must be one of {', '.join(LOG_LEVELS)}: {level!r}")

    return errors
