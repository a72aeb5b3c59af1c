import json
import os
import tempfile

import numpy as np

from greendc.energy import DataCenterSpec, ServiceClass, SlotEnvironment
from greendc.queueing import WorkloadStats
from greendc.simulation import TraceSet


# root_output = 'c:/tmp/'
root_output = tempfile.mkdtemp()


def make_dc(name='dc', max_servers=1000, network_delay=0.0, green_unit_cost=0.0,
            idle_power=0.1, peak_power=0.2, pue=1.2):
    """
    A data center with the server parameters used in the evaluation of the model
    """
    return DataCenterSpec(
        idle_power=idle_power,
        peak_power=peak_power,
        pue=pue,
        max_servers=max_servers,
        network_delay=network_delay,
        green_unit_cost=green_unit_cost,
        name=name)


def make_class(name='web', deadline=1.0, income=0.01, penalty=0.005, per_server_capacity=10.0,
               drop_threshold=1.0):
    return ServiceClass(
        deadline=deadline,
        income=income,
        penalty=penalty,
        per_server_capacity=per_server_capacity,
        drop_threshold=drop_threshold,
        name=name)


def make_env(green_energy, brown_price, means, cv=0.3, slot_length=900.0):
    stats = [WorkloadStats.iid(mean, cv * mean) for mean in means]
    return SlotEnvironment(
        green_energy=np.asarray(green_energy, dtype=np.float64),
        brown_price=np.asarray(brown_price, dtype=np.float64),
        slot_length=slot_length,
        class_stats=stats)


def one_dc_one_class(green_energy=0.0, brown_price=0.1, mean=100.0, cv=0.3, **class_kwargs):
    dcs = [make_dc('dc0')]
    classes = [make_class(**class_kwargs)]
    env = make_env([green_energy], [brown_price], [mean], cv=cv)
    return env, dcs, classes


def evaluation_instance(nb_dcs=3, nb_classes=2, green_energy=None, brown_price=None, means=None, slot_length=900.0):
    """
    Several data centers and classes, server power 0.1 kW idle, 0.2 kW peak and a PUE of 1.2
    """
    dcs = [make_dc(f'dc{i}', max_servers=2000, network_delay=0.01 * i, green_unit_cost=0.02)
           for i in range(nb_dcs)]
    classes = [make_class(f'class{j}', deadline=0.5 + 0.5 * j, income=0.01 + 0.005 * j, penalty=0.005,
                          per_server_capacity=10.0 + 10.0 * j, drop_threshold=2.0) for j in range(nb_classes)]
    if green_energy is None:
        green_energy = [1.0 + i for i in range(nb_dcs)]
    if brown_price is None:
        brown_price = [0.05 + 0.03 * i for i in range(nb_dcs)]
    if means is None:
        means = [100.0 + 50.0 * j for j in range(nb_classes)]
    env = make_env(green_energy, brown_price, means, slot_length=slot_length)
    return env, dcs, classes


def make_traces(green_energy, brown_price, means, cv=0.3, slot_length=900.0):
    """
    Trace set with i.i.d. class statistics. Arrays are shaped [nb_slots, nb_dcs] and [nb_slots, nb_classes]
    """
    stats = [[WorkloadStats.iid(mean, cv * mean) for mean in slot_means] for slot_means in means]
    return TraceSet(
        slot_length=slot_length,
        green_energy=np.asarray(green_energy, dtype=np.float64),
        brown_price=np.asarray(brown_price, dtype=np.float64),
        class_stats=stats)


def config_options(nb_dcs=1, nb_classes=1, **sections):
    """
    Configuration in the format of the command line, with a slot and data centers shaped like
    :func:`evaluation_instance`
    """
    options = {
        'schema_version': 1,
        'data_centers': [{'name': f'dc{i}', 'max_servers': 2000, 'network_delay': 0.01 * i,
                          'green_unit_cost': 0.02} for i in range(nb_dcs)],
        'classes': [{'name': f'class{j}', 'deadline': 0.5 + 0.5 * j, 'income': 0.01 + 0.005 * j,
                     'penalty': 0.005, 'per_server_capacity': 10.0 + 10.0 * j, 'drop_threshold': 2.0}
                    for j in range(nb_classes)],
        'slot': {
            'green_energy': [1.0 + i for i in range(nb_dcs)],
            'brown_price': [0.05 + 0.03 * i for i in range(nb_dcs)],
            'rates': [100.0 + 50.0 * j for j in range(nb_classes)],
        },
    }
    options.update(sections)
    return options


def write_config(options, folder=None, name='config.json'):
    if folder is None:
        folder = tempfile.mkdtemp(dir=root_output)
    path = os.path.join(folder, name)
    with open(path, 'w') as f:
        if isinstance(options, str):
            f.write(options)
        else:
            json.dump(options, f, indent=2)
    return path
