"""
Seeded Zufallsströme - zählerbasierte Generatoren pro (seed, stream, index)
"""

import zlib
from typing import Iterator, Tuple, Union

import numpy as np

# Feste Blockgröße: die Aufteilung hängt nie von der Thread-Anzahl ab
CHUNK_SIZE = 4096

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    if key < 0:
        raise ValueError(f"Stream-Schlüssel muss nichtnegativ sein: {key}")
    return int(key)


def stream(seed: int, *keys: StreamKey) -> np.random.Generator:
    """
    Liefert einen unabhängigen Philox-Generator für (seed, keys...)

    Args:
        seed: Basis-Seed des Laufs
        keys: Stream-Name und Indizes, z.B. ("sample", 3)

    Returns:
        numpy Generator, dessen Ausgabe nur von seed und keys abhängt
    """
    spawn_key = tuple(_key_to_int(k) for k in keys)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def chunks(count: int, size: int = CHUNK_SIZE) -> Iterator[Tuple[int, int, int]]:
    """Zerlegt range(count) in (index, start, stop)-Blöcke fester Größe"""
    for index, start in enumerate(range(0, count, size)):
        yield index, start, min(start + size, count)
