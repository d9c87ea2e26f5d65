"""Seeded random streams, split per subsystem by name.

A run has one integer seed; each consumer asks for its own named stream so
that adding draws in one place does not shift the draws seen elsewhere.
"""

import zlib

import numpy as np


def _seq(seed, name):
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))


def stream(seed, name):
    return np.random.default_rng(_seq(seed, name))


def subseed(seed, name):
    """Integer seed for APIs that take a seed rather than a generator."""
    return int(_seq(seed, name).generate_state(1)[0])
