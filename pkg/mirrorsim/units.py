#!/usr/bin/env python3
"""Collection of constants and unit conversion functions.

The simulation clock counts integer nanoseconds and all sizes are given in bytes.
Link rates are given in bits per second.
"""
import numpy as np

#: Nanosecond in simulation time units.
ns = 1
#: Microsecond in simulation time units.
us = 1000 * ns
#: Millisecond in simulation time units.
ms = 1000 * us
#: Second in simulation time units.
s = 1000 * ms

#: Kibibyte in bytes.
KB = 1024
#: Mebibyte in bytes.
MB = 1024 * KB

#: Gigabit per second in bits per second.
Gbps = 10**9
#: Megabit per second in bits per second.
Mbps = 10**6


def ns2ms(t):
    """Convert nanoseconds to milliseconds.

    Args:
        t (int | float | ndarray): Time in nanoseconds.

    Returns:
        float | ndarray: Time in milliseconds.
    """
    return np.asarray(t) / ms if isinstance(t, (list, tuple)) else t / ms


def serialization_delay(size, bandwidth):
    """Time needed to put a frame on the wire.

    Args:
        size (int): Frame size in bytes.
        bandwidth (int): Link rate in bits per second.

    Returns:
        int: Serialization delay in nanoseconds, rounded up.
    """
    # Integer ceiling division keeps the event ordering free of floating point noise
    return -(-size * 8 * s // int(bandwidth))
