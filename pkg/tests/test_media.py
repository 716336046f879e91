import numpy as np
import pytest

from pfm.media import (Frame, FrameSequence, MediaError, load_sequence, mirror_sequence,
                       read_frame, write_frame)


def _write_seq(d, n, w, h, seed=0):
    rng = np.random.default_rng(seed)
    d.mkdir(parents=True, exist_ok=True)
    imgs = [rng.integers(0, 256, (h, w)) / 255.0 for _ in range(n)]
    for i, im in enumerate(imgs):
        write_frame(d / f"{i:03d}.pgm", im)
    return imgs


def test_load_fifty_frames(tmp_path):
    imgs = _write_seq(tmp_path / "c0", 50, 320, 240)
    seq = load_sequence(tmp_path / "c0", "c0")
    assert len(seq) == 50
    assert (seq.width, seq.height) == (320, 240)
    assert not seq.mirrored
    for k, fr in enumerate(seq.frames):
        np.testing.assert_array_equal(fr.gray, imgs[k])


def test_load_sorts_numerically(tmp_path):
    d = tmp_path / "c"
    d.mkdir()
    for stem, val in ((10, 0.2), (9, 0.1), (100, 0.3)):
        write_frame(d / f"{stem}.pgm", np.full((16, 16), val))
    seq = load_sequence(d, "c")
    assert [f.index for f in seq.frames] == [9, 10, 100]
    assert [round(f.gray[0, 0], 2) for f in seq.frames] == [0.1, 0.2, 0.3]


def test_single_black_frame(tmp_path):
    d = tmp_path / "c"
    d.mkdir()
    write_frame(d / "0.pgm", np.zeros((16, 16)))
    seq = load_sequence(d, "c")
    assert len(seq) == 1
    assert np.all(seq[0].gray == 0.0)


def test_ppm_luminance(tmp_path):
    write_frame(tmp_path / "0.ppm", np.full((16, 16, 3), 128 / 255.0))
    fr = read_frame(tmp_path / "0.ppm")
    expected = 0.299 * 128 / 255 + 0.587 * 128 / 255 + 0.114 * 128 / 255
    assert abs(expected - 0.50196) < 1e-5
    np.testing.assert_allclose(fr.gray, expected, atol=1e-12)
    assert fr.color.shape == (16, 16, 3)


def test_missing_directory(tmp_path):
    with pytest.raises(MediaError, match="missing"):
        load_sequence(tmp_path / "nope", "c")


def test_malformed_frame_names_file(tmp_path):
    d = tmp_path / "c"
    d.mkdir()
    write_frame(d / "000.pgm", np.zeros((16, 16)))
    (d / "001.pgm").write_bytes(b"P5\n16 16\n255\n" + b"\x00" * 10)
    with pytest.raises(MediaError, match="001.pgm"):
        load_sequence(d, "c")


def test_mixed_dimensions(tmp_path):
    d = tmp_path / "c"
    d.mkdir()
    write_frame(d / "000.pgm", np.zeros((16, 16)))
    write_frame(d / "001.pgm", np.zeros((20, 16)))
    with pytest.raises(MediaError, match="001.pgm"):
        load_sequence(d, "c")


def test_frame_too_small():
    with pytest.raises(MediaError):
        Frame(np.zeros((8, 32)))


def test_mirror_single_pixel():
    # x -> width - 1 - x; frames are at least 16 px wide, so width 20 here
    g = np.zeros((16, 20))
    g[5, 2] = 1.0
    seq = FrameSequence((Frame(g),), "c", "s1", "t1")
    m = mirror_sequence(seq)
    assert m[0].gray[5, 17] == 1.0 and m[0].gray.sum() == 1.0
    assert m.mirrored and m.subject_id == "s1" and m.trajectory_id == "t1"


def test_mirror_involution_and_constant():
    rng = np.random.default_rng(1)
    frames = tuple(Frame(rng.random((20, 17)), rng.random((20, 17, 3)), index=i) for i in range(3))
    seq = FrameSequence(frames, "c")
    back = mirror_sequence(mirror_sequence(seq))
    assert back == seq
    const = FrameSequence((Frame(np.full((16, 16), 0.3)),), "c")
    np.testing.assert_array_equal(mirror_sequence(const)[0].gray, const[0].gray)
