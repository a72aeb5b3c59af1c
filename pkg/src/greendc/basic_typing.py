from typing import Sequence, Union, Dict, Any, List
import numpy as np

"""Generic numeric type"""
Numeric = Union[int, float]

"""1D array of float64"""
Vector = np.ndarray

"""2D array of float64. Per (data center, class) quantities are shaped [N, J]"""
Matrix = np.ndarray

"""Request-rate samples of one class over one slot, one sample per second"""
RateSamples = Union[Sequence[float], np.ndarray]

"""Nested dictionary of options (see :func:`greendc.cli.config.create_default_options`)"""
Options = Dict[str, Any]

"""One emitted report record: ordered mapping of field name to scalar value"""
Record = Dict[str, Any]
Records = List[Record]
