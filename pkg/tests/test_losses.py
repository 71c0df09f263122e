"""Loss identities and finite-difference gradient verification."""

import math

import pytest
import torch

from kgchat.generator import Seq2SeqGenerator, _gen_loss, _make_collate
from kgchat.matcher import PairwiseMatcher, TwinMatcher
from kgchat.nn import ModelConfig, binary_match_loss, gradient_check, multitask_loss, pairwise_ranking_loss
from kgchat.textprep import GenSample


def _cfg(vocab=30):
    return ModelConfig(vocab_size=vocab, d_model=16, n_layers=1, n_heads=2, max_positions=64)


def test_match_loss_equals_direct_bce():
    torch.manual_seed(0)
    logits = torch.randn(12, dtype=torch.float64)
    labels = torch.tensor([1, 0] * 6, dtype=torch.float64)
    direct = 0.0
    for z, y in zip(logits.tolist(), labels.tolist()):
        s = 1 / (1 + math.exp(-z))
        direct += -math.log(s) if y == 1 else -math.log(1 - s)
    assert float(binary_match_loss(logits, labels)) == pytest.approx(direct, abs=1e-8)


def test_pairwise_loss_symmetry_of_labels():
    logits = torch.tensor([2.0, -2.0], dtype=torch.float64)
    labels = torch.tensor([1.0, 0.0], dtype=torch.float64)
    # s(2.0) trained toward 1 and s(-2.0) toward 0 are the same objective value
    a = float(pairwise_ranking_loss(logits[:1], labels[:1]))
    b = float(pairwise_ranking_loss(logits[1:], labels[1:]))
    assert a == pytest.approx(b, abs=1e-12)


def test_multitask_identities():
    lm = torch.tensor(1.7)
    nsp = torch.tensor(0.4)
    assert multitask_loss(lm, nsp, suitable=False) is nsp  # exactly L_NSP
    assert float(multitask_loss(lm, nsp, suitable=True)) == pytest.approx(0.5 * 1.7 + 0.5 * 0.4)
    c = torch.tensor(0.9)
    assert float(multitask_loss(c, c, suitable=True)) == pytest.approx(0.9)


def _twin_setup(shared=True):
    torch.manual_seed(1)
    model = TwinMatcher(_cfg(), shared_encoders=shared).double().eval()
    h_ids = torch.randint(1, 30, (4, 7))
    k_ids = torch.randint(1, 30, (4, 5))
    mask_h = torch.ones_like(h_ids)
    mask_k = torch.ones_like(k_ids)
    labels = torch.tensor([1.0, 0.0, 1.0, 0.0], dtype=torch.float64)

    def loss_fn():
        return binary_match_loss(model(h_ids, mask_h, k_ids, mask_k), labels)

    return model, loss_fn


def test_gradient_check_match_loss():
    model, loss_fn = _twin_setup()
    assert gradient_check(model, loss_fn, epsilon=1e-5, coords_per_param=20) <= 1e-4


def test_gradient_check_pairwise_loss():
    torch.manual_seed(2)
    model = PairwiseMatcher(_cfg()).double().eval()
    ids = torch.randint(1, 30, (4, 12))
    mask = torch.ones_like(ids)
    labels = torch.tensor([1.0, 0.0, 0.0, 1.0], dtype=torch.float64)

    def loss_fn():
        return pairwise_ranking_loss(model(ids, mask), labels)

    assert gradient_check(model, loss_fn, epsilon=1e-5, coords_per_param=20) <= 1e-4


def _gen_setup(labels):
    torch.manual_seed(3)
    cfg = _cfg()
    model = Seq2SeqGenerator(cfg).double().eval()

    class _Tok:
        pad_id, cls_id, sep_id, bos_id, eos_id = 0, 2, 3, 6, 7
        speaker1_id, speaker2_id = 4, 5

    tok = _Tok()
    samples = [
        GenSample(history=((10, 11, 12),), knowledge=((13, 14, 15),), reply=(16, 17), label=labels[0]),
        GenSample(history=((18, 19), (20,)), knowledge=((21, 22),), reply=(23, 24, 25), label=labels[1]),
    ]
    batch = _make_collate(tok, "encdec", 1, 64)(samples)

    def loss_fn():
        return _gen_loss(model, batch, use_nsp=True)

    return model, loss_fn


def test_gradient_check_multitask_alpha_half():
    model, loss_fn = _gen_setup(labels=(1, 1))
    assert gradient_check(model, loss_fn, epsilon=1e-5, coords_per_param=15) <= 1e-4


def test_gradient_check_multitask_alpha_zero():
    model, loss_fn = _gen_setup(labels=(0, 0))
    assert gradient_check(model, loss_fn, epsilon=1e-5, coords_per_param=15) <= 1e-4


def test_epsilon_range_enforced():
    model, loss_fn = _twin_setup()
    with pytest.raises(ValueError):
        gradient_check(model, loss_fn, epsilon=1e-2)
