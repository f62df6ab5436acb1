"""Regenerate the small grayscale PGM corpus in data/images/.

Sources are scikit-image sample images released under CC0 or with no known
copyright restrictions.
"""
import pathlib

import numpy as np
import skimage.data
from skimage.transform import resize

NAMES = ["camera", "coins", "brick", "grass", "gravel", "text"]
SIZE = 128


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.astype(np.uint8).tobytes())


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "images"
    out.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        img = getattr(skimage.data, name)()
        if img.ndim == 3:
            img = img[..., :3].mean(axis=2)
        side = min(img.shape)
        img = img[:side, :side].astype(np.float64)
        small = resize(img, (SIZE, SIZE), anti_aliasing=True, preserve_range=True)
        write_pgm(out / f"{name}.pgm", np.clip(np.rint(small), 0, 255))


if __name__ == "__main__":
    main()
