import dataclasses
import io

import numpy as np
import pytest

from vqpool.formats import write_dataset
from vqpool.synth import SyntheticSpec, generate_synthetic, label_names
from vqpool.vq import build_counts_from_records


def serialize(spec, split="train"):
    records = generate_synthetic(spec, split)
    buf = io.BytesIO()
    write_dataset(records, spec.header(len(records)), buf)
    return buf.getvalue()


def test_deterministic_under_seed():
    spec = SyntheticSpec(classes=3, utterances_per_class=4, seed=7)
    assert serialize(spec) == serialize(spec)


def test_different_seeds_differ():
    a = SyntheticSpec(classes=3, utterances_per_class=4, seed=7)
    b = dataclasses.replace(a, seed=8)
    assert serialize(a) != serialize(b)


def test_zero_filler_fraction_all_informative():
    spec = SyntheticSpec(classes=2, utterances_per_class=3, filler_fraction=0.0, seed=1)
    for rec in generate_synthetic(spec, "train"):
        # filler tuples occupy indices [0, filler_tuples)
        assert (rec.Q >= spec.filler_tuples).all()


def test_records_validate_against_header():
    spec = SyntheticSpec(classes=2, utterances_per_class=2, seed=3)
    records = generate_synthetic(spec, "train")
    header = spec.header(len(records))
    for rec in records:
        rec.validate(header)


def test_train_test_ids_disjoint():
    spec = SyntheticSpec(classes=2, utterances_per_class=3, seed=5)
    train_ids = {r.id for r in generate_synthetic(spec, "train")}
    test_ids = {r.id for r in generate_synthetic(spec, "test")}
    assert not train_ids & test_ids


@pytest.mark.parametrize("fraction", [0.55, 0.7, 0.9])
def test_filler_tuples_dominate_global_counts(fraction):
    spec = SyntheticSpec(classes=4, utterances_per_class=10,
                         filler_fraction=fraction, seed=11)
    records = generate_synthetic(spec, "train")
    counts = build_counts_from_records(records, spec.G, spec.V)
    filler = {k: v for k, v in counts.tuple_counts.items() if k[0] < spec.filler_tuples}
    keyword = {k: v for k, v in counts.tuple_counts.items() if k[0] >= spec.filler_tuples}
    assert filler and keyword
    assert min(filler.values()) > max(keyword.values())


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(classes=0).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(filler_fraction=1.0).validate()
    with pytest.raises(ValueError):
        SyntheticSpec(V=4).validate()  # too few indices for the tuple pools
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(classes=1, V=64), "validation")


def test_label_names_cover_classes():
    spec = SyntheticSpec(classes=3)
    assert label_names(spec) == ["class0", "class1", "class2"]
