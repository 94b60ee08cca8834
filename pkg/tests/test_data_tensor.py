# type: ignore
"""Test the DataTensor model, scrambling and the tensor file format."""

import numpy as np
import pytest

from emergent_pde.constants import Axis
from emergent_pde.models import (
    DataTensor,
    ScrambleRecord,
    apply_record,
    load_tensor,
    mask_entries,
    read_sidecar,
    save_tensor,
    scramble,
    sidecar_path,
    unscramble,
)
from emergent_pde.utils.errors import ShapeMismatchError, TensorFormatError


def test_tensor_rejects_wrong_rank():
    """Test that only 3-D values are accepted."""
    # GIVEN a 2-D array
    # WHEN a tensor is built from it
    # THEN validation fails
    with pytest.raises(ValueError, match="3 axes"):
        DataTensor(values=np.zeros((4, 4)))


def test_tensor_rejects_non_finite_observed_values():
    """Test that missing entries may hold NaN but observed ones may not."""
    # GIVEN values with a NaN
    values = np.ones((1, 4, 4))
    values[0, 1, 1] = np.nan
    mask = np.ones_like(values, dtype=bool)

    # WHEN the NaN is observed
    # THEN validation fails
    with pytest.raises(ValueError, match="finite"):
        DataTensor(values=values, mask=mask)

    # WHEN the NaN is masked out
    mask[0, 1, 1] = False
    tensor = DataTensor(values=values, mask=mask)

    # THEN the tensor is valid and counts one missing entry
    assert tensor.n_missing == 1
    # AND filled() replaces it with the observed mean
    assert tensor.filled()[0, 1, 1] == pytest.approx(1.0)


def test_tensor_rejects_meta_of_wrong_length(wave_tensor):
    """Test that axis metadata needs one row per channel."""
    # GIVEN a tensor and the metadata of a longer axis
    tensor = wave_tensor(n_t=10, n_s=12)

    # WHEN the space metadata is attached to the time axis
    # THEN validation fails
    with pytest.raises(ValueError, match="metadata"):
        DataTensor(values=tensor.values, axis_meta={Axis.TIME: tensor.meta(Axis.SPACE)})


def test_scramble_then_unscramble_restores_tensor(wave_tensor):
    """Test that unscrambling a scramble without drops gives back the tensor."""
    # GIVEN a tensor with metadata on every axis
    tensor = wave_tensor()

    # WHEN every axis is shuffled
    scrambled, record = scramble(tensor, list(Axis), seed=11)

    # THEN the channels are reordered
    assert record.perm(Axis.TIME) != list(range(tensor.dims[1]))
    assert not np.array_equal(scrambled.values, tensor.values)
    # AND the metadata follows its channels
    assert np.array_equal(
        scrambled.meta(Axis.SPACE).column("x"),
        tensor.meta(Axis.SPACE).column("x")[record.perm(Axis.SPACE)],
    )
    # AND unscrambling restores the original exactly
    assert unscramble(scrambled, record) == tensor


def test_scramble_is_deterministic(wave_tensor):
    """Test that equal seeds scramble identically."""
    # GIVEN a tensor
    tensor = wave_tensor()

    # WHEN it is scrambled twice with one seed and once with another
    first, record_1 = scramble(tensor, ["t", "s"], {"t": 0.25}, seed=3)
    second, record_2 = scramble(tensor, ["t", "s"], {"t": 0.25}, seed=3)
    _, record_3 = scramble(tensor, ["t", "s"], {"t": 0.25}, seed=4)

    # THEN equal seeds give equal results
    assert first == second
    assert record_1 == record_2
    assert record_1 != record_3
    # AND unlisted axes keep their order
    assert record_1.perm(Axis.PARAMETER) == list(range(tensor.dims[0]))


def test_scramble_drops_channels(wave_tensor):
    """Test dropping a fraction of channels."""
    # GIVEN a tensor with 20 snapshots
    tensor = wave_tensor(n_t=20)

    # WHEN a quarter of the snapshots is dropped
    scrambled, record = scramble(tensor, ["t"], {"t": 0.25}, seed=5)

    # THEN five snapshots are gone and recorded
    assert scrambled.dims == (6, 15, 24)
    assert len(record.dropped(Axis.TIME)) == 5
    assert record.original_size(Axis.TIME) == 20

    # WHEN the scramble is undone
    restored = unscramble(scrambled, record)

    # THEN dropped snapshots come back masked
    assert restored.dims == tensor.dims
    assert restored.n_missing == 5 * 6 * 24
    assert not restored.mask[:, record.dropped(Axis.TIME), :].any()
    assert np.isnan(restored.meta(Axis.TIME).values[record.dropped(Axis.TIME)]).all()


def test_scramble_identity_keeps_order(wave_tensor):
    """Test the identity scramble."""
    # GIVEN a tensor
    tensor = wave_tensor()

    # WHEN every axis is listed but identity is requested
    scrambled, record = scramble(tensor, list(Axis), seed=1, identity=True)

    # THEN nothing moves
    assert scrambled == tensor
    assert record == ScrambleRecord.identity(tensor.dims, seed=1)


@pytest.mark.parametrize(
    ("dims", "fraction", "error"),
    [
        pytest.param((6, 20, 24), {"p": 0.5}, ValueError, id="fewer-than-four"),
        pytest.param((6, 20, 24), {"s": 1.0}, ValueError, id="fraction-one"),
        pytest.param((6, 20, 24), {"t": -0.1}, ValueError, id="negative"),
    ],
)
def test_scramble_rejects_bad_drops(wave_tensor, dims, fraction, error):
    """Test invalid drop fractions."""
    # GIVEN a tensor
    tensor = wave_tensor(*dims)

    # WHEN an invalid fraction is requested
    # THEN an error is raised
    with pytest.raises(error):
        scramble(tensor, list(Axis), fraction, seed=0)


def test_mask_entries_hides_a_fraction(wave_tensor):
    """Test hiding random entries behind the mask."""
    # GIVEN a fully observed tensor of 6 * 20 * 24 entries
    tensor = wave_tensor()

    # WHEN a tenth of the entries is masked, twice with one seed
    masked = mask_entries(tensor, 0.1, seed=3)
    again = mask_entries(tensor, 0.1, seed=3)

    # THEN 288 entries are hidden the same way both times
    assert masked.n_missing == 288
    assert np.array_equal(masked.mask, again.mask)
    # AND hidden entries are NaN while the rest is untouched
    assert np.isnan(masked.values[~masked.mask]).all()
    assert np.array_equal(masked.values[masked.mask], tensor.values[masked.mask])

    # WHEN a tenth of the remaining entries is masked
    # THEN the earlier gaps stay and new ones are added
    more = mask_entries(masked, 0.1, seed=4)
    assert more.n_missing == 288 + 259
    assert not more.mask[~masked.mask].any()


@pytest.mark.parametrize("fraction", [pytest.param(-0.1, id="negative"), pytest.param(1.0, id="one")])
def test_mask_entries_rejects_bad_fraction(wave_tensor, fraction):
    """Test invalid mask fractions."""
    # GIVEN a tensor
    # WHEN an invalid fraction is requested
    # THEN a ValueError is raised
    with pytest.raises(ValueError, match="mask fraction"):
        mask_entries(wave_tensor(), fraction)


def test_mask_entries_without_a_fraction_is_a_no_op(wave_tensor):
    """Test masking nothing."""
    # GIVEN a tensor
    tensor = wave_tensor()

    # WHEN no entries are masked
    # THEN the tensor comes back unchanged and without a mask
    assert mask_entries(tensor, 0.0) is tensor
    assert tensor.mask is None


def test_scramble_rejects_empty_axis():
    """Test scrambling an axis without channels."""
    # GIVEN a tensor with an empty space axis
    tensor = DataTensor(values=np.zeros((2, 5, 0)))

    # WHEN it is scrambled
    # THEN the empty axis is reported
    with pytest.raises(ShapeMismatchError, match="empty"):
        scramble(tensor, list(Axis), seed=0)


def test_record_must_partition_indices():
    """Test the scramble record invariant."""
    # GIVEN kept and dropped indices that overlap
    # WHEN the record is built
    # THEN validation fails
    with pytest.raises(ValueError, match="partition"):
        ScrambleRecord(perm_p=[0], perm_t=[1, 0], perm_s=[0, 1], dropped_t=[1])


def test_apply_record_checks_dims(wave_tensor):
    """Test applying a record built for other dimensions."""
    # GIVEN a tensor and a record for a smaller one
    tensor = wave_tensor()
    record = ScrambleRecord.identity((2, 2, 2))

    # WHEN the record is applied
    # THEN the mismatch is reported
    with pytest.raises(ShapeMismatchError):
        apply_record(tensor, record)


def test_save_and_load_tensor(tmp_path, wave_tensor):
    """Test the tensor file format with a mask, metadata and a scramble record."""
    # GIVEN a scrambled tensor with dropped channels restored as a mask
    scrambled, record = scramble(wave_tensor(), ["t"], {"t": 0.25}, seed=9)
    tensor = unscramble(scrambled, record)
    path = tmp_path / "tensor.epde"

    # WHEN it is saved with its record and an extra entry
    save_tensor(tensor, path, record=record, extra={"note": "demo"})

    # THEN it loads back identical
    assert load_tensor(path) == tensor
    # AND the sidecar carries the record and the extra entry
    sidecar = read_sidecar(path)
    assert sidecar_path(path).exists()
    assert sidecar.scramble == record
    assert sidecar.extra == {"note": "demo"}


def test_save_is_byte_deterministic(tmp_path, wave_tensor):
    """Test that saving the same tensor twice writes the same bytes."""
    # GIVEN a tensor
    tensor = wave_tensor()

    # WHEN it is saved twice
    a = save_tensor(tensor, tmp_path / "a.epde")
    b = save_tensor(tensor, tmp_path / "b.epde")

    # THEN the files are identical
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize(
    ("corrupt", "match"),
    [
        pytest.param(lambda data: b"XXXX" + data[4:], "magic", id="magic"),
        pytest.param(lambda data: data[:4] + b"\x09\x00" + data[6:], "version", id="version"),
        pytest.param(lambda data: data[:-3], "truncated", id="truncated"),
        pytest.param(lambda data: data[:3], "too short", id="too-short"),
    ],
)
def test_load_tensor_rejects_corrupt_files(tmp_path, wave_tensor, corrupt, match):
    """Test the tensor reader on damaged files."""
    # GIVEN a saved tensor whose bytes are damaged
    path = save_tensor(wave_tensor(), tmp_path / "tensor.epde")
    path.write_bytes(corrupt(path.read_bytes()))

    # WHEN it is loaded
    # THEN a TensorFormatError is raised
    with pytest.raises(TensorFormatError, match=match):
        load_tensor(path)


def test_as_table(wave_tensor):
    """Test the rich summary of a tensor."""
    # GIVEN a tensor
    tensor = wave_tensor()

    # WHEN it is summarized
    table = tensor.as_table()

    # THEN there is one row per axis
    assert table.row_count == 3
