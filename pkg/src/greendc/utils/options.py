import collections.abc
from typing import Any, Dict, Mapping, MutableMapping


def recursive_dict_update(options: MutableMapping, options_update: Mapping, strict: bool = False,
                          root_name: str = '') -> MutableMapping:
    """
    Update ``options`` in place with the values of ``options_update``. Nested dictionaries are updated
    recursively so that the keys not present in ``options_update`` are kept.

    Args:
        options: the dictionary to be updated
        options_update: the updated values
        strict: if True, a key of ``options_update`` missing from ``options`` raises ``KeyError``
        root_name: the path of ``options``, used to name the unknown keys

    Returns:
        ``options``
    """
    for name, value in options_update.items():
        path = f'{root_name}.{name}' if root_name else name
        if name not in options:
            if strict:
                raise KeyError(path)
            options[name] = value
            continue

        current = options[name]
        if isinstance(current, collections.abc.MutableMapping) and isinstance(value, collections.abc.Mapping):
            recursive_dict_update(current, value, strict=strict, root_name=path)
        else:
            options[name] = value
    return options


def flatten_nested_dictionaries(d: Mapping, root_name: str = '', delimiter: str = '.') -> Dict[str, Any]:
    """
    Recursively flatten a dictionary of arbitrary nested size into a flattened dictionary
    of nested size 1

    Args:
        d: a dictionary
        root_name: the root name to be appended of the keys of d
        delimiter: use this string as delimiter to concatenate nested dictionaries

    Returns:
        a dictionary of maximum depth 1
    """
    assert isinstance(d, collections.abc.Mapping)
    flattened = collections.OrderedDict()
    for name, value in d.items():
        full_name = name if len(root_name) == 0 else f'{root_name}{delimiter}{name}'
        if isinstance(value, collections.abc.Mapping):
            flattened.update(flatten_nested_dictionaries(value, root_name=full_name, delimiter=delimiter))
        else:
            flattened[full_name] = value
    return flattened
