import numpy as np
import pytest

from ffdic.pgm import read_pgm, write_pgm


def test_roundtrip_is_lossless_after_quantization(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.random((12, 17))
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.shape == img.shape
    assert np.array_equal(back, np.round(img * 65535) / 65535)


def test_second_write_of_read_image_is_byte_identical(tmp_path):
    img = np.random.default_rng(1).random((9, 9))
    first = tmp_path / "a.pgm"
    second = tmp_path / "b.pgm"
    write_pgm(first, img)
    write_pgm(second, read_pgm(first))
    assert first.read_bytes() == second.read_bytes()


def test_header_layout(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(path, np.zeros((4, 8)))
    data = path.read_bytes()
    assert data.startswith(b"P5\n8 4\n65535\n")
    assert len(data) == len(b"P5\n8 4\n65535\n") + 4 * 8 * 2


def test_extreme_values_map_to_full_range(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm(path, np.array([[0.0, 1.0], [2.0, -1.0]]))  # clamped on write
    back = read_pgm(path)
    assert np.array_equal(back, np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_reads_8_bit_files(tmp_path):
    path = tmp_path / "small.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 51]))
    img = read_pgm(path)
    assert np.array_equal(img, np.array([[0, 128], [255, 51]]) / 255.0)


def test_skips_header_comments(tmp_path):
    path = tmp_path / "commented.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# another note\n255\n" + bytes([10, 20]))
    img = read_pgm(path)
    assert np.array_equal(img, np.array([[10, 20]]) / 255.0)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
    with pytest.raises(ValueError):
        read_pgm(path)


def test_rejects_truncated_pixels(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2]))
    with pytest.raises(ValueError):
        read_pgm(path)


def test_write_rejects_bad_arrays(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros(8))
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.array([[0.5, np.nan]]))
