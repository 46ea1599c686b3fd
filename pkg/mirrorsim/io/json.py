#!/usr/bin/env python3
"""JSON file handling."""
import dataclasses
import json

import numpy as np


def read_json(filename):
    """Load scenarios and run metrics from a JSON file.

    Args:
        filename (str): JSON input file path/name.

    Returns:
        Scenario, metrics, or containers of them.
    """
    from ..analysis import RunMetrics
    from ..scenario import from_dict

    def link_dict(dct):
        """Restore (link id, sending node) keys."""
        return {tuple(int(i) for i in key.split(':')): value for key, value in dct.items()}

    def custom_object_hook(dct):
        """Custom JSON object hook to create mirrorsim classes after deserialization."""
        if '__scenario__' in dct:
            return from_dict(dct['__scenario__'])
        if '__metrics__' in dct:
            data = dct['__metrics__']
            data['link_payload'] = link_dict(data['link_payload'])
            data['link_total'] = link_dict(data['link_total'])
            # NaN ratios are stored as null since JSON has no NaN
            if data['saving_ratio'] is None:
                data['saving_ratio'] = float('nan')
            return RunMetrics(**data)
        return dct

    if not filename.endswith('.json'):
        filename += '.json'

    with open(filename, encoding='utf-8') as fh:
        return json.load(fh, object_hook=custom_object_hook)


def write_json(obj, filename):
    """Save scenarios and run metrics in a JSON file.

    Args:
        obj: Scenario, metrics, or containers of them.
        filename (str): JSON output file path/name.
    """
    from ..analysis import RunMetrics
    from ..scenario import ScenarioConfig

    def convert(obj):
        """Replace mirrorsim objects by tagged dictionaries."""
        if isinstance(obj, ScenarioConfig):
            return {'__scenario__': obj.to_dict()}
        if isinstance(obj, RunMetrics):
            data = dataclasses.asdict(obj)
            data['link_payload'] = {f'{a}:{b}': v for (a, b), v in obj.link_payload.items()}
            data['link_total'] = {f'{a}:{b}': v for (a, b), v in obj.link_total.items()}
            if np.isnan(obj.saving_ratio):
                data['saving_ratio'] = None
            return {'__metrics__': data}
        if isinstance(obj, dict):
            return {key: convert(value) for key, value in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [convert(value) for value in obj]
        return obj

    class CustomEncoder(json.JSONEncoder):
        """Custom JSON encoder class to serialize numpy scalars."""
        def default(self, obj):
            if isinstance(obj, np.integer):
                return int(obj)
            if isinstance(obj, np.floating):
                return float(obj)
            return json.JSONEncoder.default(self, obj)

    if not filename.endswith('.json'):
        filename += '.json'

    with open(filename, 'w', encoding='utf-8') as fp:
        json.dump(convert(obj), fp, cls=CustomEncoder)
