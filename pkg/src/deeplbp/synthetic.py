"""Synthetic "texture of textures" data.

Every image is a grid of tiles, each holding bright or dark noise inside a
flat mid-grey frame at least as wide as the LBP radius, with a flat outer
margin so cropping never cuts into a tile. A first-layer code therefore
never sees past its own tile's frame, and every image holds the same number
of each tile kind: the first-order LBP statistics of the two classes
coincide.
The classes differ only in layout: class ``checker`` alternates the
textures, class ``halves`` splits them into two blocks.
"""

from __future__ import annotations

import numpy as np

from .evaluation import Dataset

CLASS_NAMES = ["checker", "halves"]


def _bright(rng, size: int) -> np.ndarray:
    return rng.uniform(150, 255, (size, size))


def _dark(rng, size: int) -> np.ndarray:
    return rng.uniform(0, 106, (size, size))


def layout(kind: str, grid: int, rng) -> np.ndarray:
    """(grid, grid) boolean map of which tiles hold the bright texture."""
    i, j = np.indices((grid, grid))
    if kind == "checker":
        mask = (i + j) % 2 == 0
    elif kind == "halves":
        mask = (j < grid // 2) if rng.random() < 0.5 else (i < grid // 2)
    else:
        raise ValueError(f"unknown layout {kind!r}")
    return ~mask if rng.random() < 0.5 else mask


def meta_texture_image(kind: str, rng, size: int = 64, grid: int = 4, frame: int = 3,
                       margin: int = 4) -> np.ndarray:
    """One image; ``margin`` flat pixels around the tile grid keep border tiles intact after cropping."""
    tile = (size - 2 * margin) // grid
    inner = tile - 2 * frame
    if inner < 1:
        raise ValueError("frame leaves no room for the tile texture")
    img = np.full((size, size), 128.0)
    for (r, c), bright in np.ndenumerate(layout(kind, grid, rng)):
        patch = _bright(rng, inner) if bright else _dark(rng, inner)
        y, x = margin + r * tile + frame, margin + c * tile + frame
        img[y:y + inner, x:x + inner] = patch
    return np.clip(np.rint(img), 0, 255)


def meta_texture_dataset(per_class: int = 100, size: int = 64, seed: int = 0,
                         grid: int = 4, frame: int = 3, margin: int = 4) -> Dataset:
    """Balanced two-class dataset; 8-bit valued float images."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(per_class):
        for label, kind in enumerate(CLASS_NAMES):
            images.append(meta_texture_image(kind, rng, size, grid, frame, margin))
            labels.append(label)
    return Dataset(images, labels, list(CLASS_NAMES))
