from fractions import Fraction
from typing import Union

from .errors import ConfigError

EpsilonLike = Union[str, int, float, Fraction]


def parse_epsilon(value: EpsilonLike, path: str = 'epsilon') -> Fraction:
    """ Parse an l-inf budget given as an exact rational string ("8/255"), int or float.

    Floats are converted through their shortest repr so '0.5' and 0.5 agree.
    """
    try:
        if isinstance(value, Fraction):
            eps = value
        elif isinstance(value, float):
            eps = Fraction(repr(value))
        else:
            eps = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(path, f'cannot parse epsilon {value!r} ({e})')
    if not 0 <= eps <= 1:
        raise ConfigError(path, f'epsilon {eps} outside [0, 1]')
    return eps


def format_epsilon(eps: EpsilonLike) -> str:
    eps = parse_epsilon(eps)
    if eps.denominator == 1:
        return str(eps.numerator)
    return f'{eps.numerator}/{eps.denominator}'
