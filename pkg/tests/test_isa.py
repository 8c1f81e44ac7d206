from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from emlcheck.isa import (
    AddressRegion, EnclaveImage, EnclaveLayout, Instruction,
    classify_address, instruction_address, validate_image, validate_layout,
)

from conftest import STD_LAYOUT


def test_classify_inside_code():
    assert classify_address(STD_LAYOUT, 0x100004) is AddressRegion.TRUSTED_CODE


def test_classify_zero_address_untrusted():
    assert classify_address(STD_LAYOUT, 0x0) is AddressRegion.UNTRUSTED


def test_classify_stack():
    assert classify_address(STD_LAYOUT, 0x10DFF8) is AddressRegion.TRUSTED_STACK


def test_classify_gap_is_trusted_data():
    # Inside the enclave but in no declared sub-region.
    assert classify_address(STD_LAYOUT, 0x100000 + 0x3000) is AddressRegion.TRUSTED_DATA


def test_classify_boundaries():
    assert classify_address(STD_LAYOUT, STD_LAYOUT.base - 1) is AddressRegion.UNTRUSTED
    assert classify_address(STD_LAYOUT, STD_LAYOUT.end) is AddressRegion.UNTRUSTED
    # Last byte inside the enclave falls in the gap after the stack region.
    assert classify_address(STD_LAYOUT, STD_LAYOUT.end - 8) is AddressRegion.TRUSTED_DATA
    assert classify_address(STD_LAYOUT, STD_LAYOUT.stack_top - 8) is AddressRegion.TRUSTED_STACK


def test_instruction_address():
    layout = replace(STD_LAYOUT, code_offset=0)
    assert instruction_address(layout, 0) == 0x100000
    assert instruction_address(layout, 3) == 0x10000C
    assert instruction_address(replace(STD_LAYOUT, code_offset=0x200), 1) == 0x100204


def test_instruction_address_out_of_range():
    with pytest.raises(IndexError):
        instruction_address(STD_LAYOUT, 0x1000 // 4)


def minimal_image(**kwargs) -> EnclaveImage:
    layout = replace(STD_LAYOUT, code_length=4)
    fields = dict(format_version=1, layout=layout,
                  code=(Instruction("EEXIT", ()),), data=(), symbols={})
    fields.update(kwargs)
    return EnclaveImage(**fields)


def test_validate_minimal_image_ok():
    assert validate_image(minimal_image()) == []


def test_validate_heap_stack_overlap():
    layout = replace(STD_LAYOUT, code_length=4,
                     heap_offset=0xC000, heap_size=0x2000)
    errors = validate_image(minimal_image(layout=layout))
    assert any("region overlap: heap/stack" in e for e in errors)


def test_validate_symbol_out_of_range():
    image = minimal_image(symbols={"ghost": STD_LAYOUT.base + STD_LAYOUT.size})
    errors = validate_image(image)
    assert any("symbol out of range" in e for e in errors)


def test_validate_code_length_mismatch():
    image = minimal_image(layout=replace(STD_LAYOUT, code_length=8))
    assert any("code length mismatch" in e for e in validate_image(image))


def test_validate_data_outside_region():
    image = minimal_image(data=((0x1000, (1, 2)),))
    assert any("data entry outside data region" in e for e in validate_image(image))


def test_validate_misaligned_base():
    layout = replace(STD_LAYOUT, base=0x100004, code_length=4)
    assert any("8-aligned" in e for e in validate_layout(layout))


@st.composite
def layouts(draw):
    base = draw(st.integers(0, 1 << 20)) * 8
    code_len = draw(st.integers(1, 64)) * 4
    gap = lambda: draw(st.integers(0, 8)) * 8
    data_off = -(-code_len // 8) * 8 + gap()
    data_len = draw(st.integers(0, 32)) * 8
    heap_off = data_off + data_len + gap()
    heap_size = draw(st.integers(0, 32)) * 8
    stack_off = heap_off + heap_size + gap()
    stack_size = draw(st.integers(0, 32)) * 8
    size = stack_off + stack_size + gap() + 8
    return EnclaveLayout(base=base, size=size, code_offset=0, code_length=code_len,
                         data_offset=data_off, data_length=data_len,
                         heap_offset=heap_off, heap_size=heap_size,
                         stack_offset=stack_off, stack_size=stack_size)


@given(layouts(), st.integers(0, (1 << 64) - 1))
def test_classification_total_and_consistent(layout, addr):
    assert validate_layout(layout) == []
    region = classify_address(layout, addr)
    assert isinstance(region, AddressRegion)
    outside = addr < layout.base or addr >= layout.base + layout.size
    assert (region is AddressRegion.UNTRUSTED) == outside


@given(layouts())
def test_instruction_addresses_injective_and_in_code(layout):
    n = layout.code_length // 4
    addrs = [instruction_address(layout, i) for i in range(n)]
    assert len(set(addrs)) == n
    for a in addrs:
        assert classify_address(layout, a) is AddressRegion.TRUSTED_CODE
