"""End-to-end conceal/reveal: key from the cover, encrypt, hide; and back."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import chaoscrypt, keyforge, sift, stego
from .chaoscrypt import CnnTemplate
from .errors import InsufficientCapacity
from .imagecore import Image


@dataclass(frozen=True)
class Settings:
    template: CnnTemplate = chaoscrypt.DEFAULT_TEMPLATE
    dt: float = chaoscrypt.DEFAULT_DT
    sift_config: sift.SiftConfig = sift.DEFAULT_CONFIG
    n_steps: int = stego.DEFAULT_N_STEPS

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


DEFAULT_SETTINGS = Settings()


@dataclass(frozen=True, eq=False)
class Concealed:
    stego: Image
    key: keyforge.RawKey
    params: keyforge.KeyParams
    keystream: chaoscrypt.Keystream
    payload: stego.StegoPayload
    capacity_bits: int


@dataclass(frozen=True, eq=False)
class Revealed:
    message: Optional[Image]  # None for an empty payload
    key: keyforge.RawKey
    params: keyforge.KeyParams
    keystream: chaoscrypt.Keystream
    payload: stego.StegoPayload


def encrypt(message: Image, key: keyforge.RawKey, s: Settings = DEFAULT_SETTINGS):
    params = keyforge.derive_params(key, message)
    ks = chaoscrypt.generate_keystream(params, message.size, s.template, s.dt)
    return chaoscrypt.xor_transform(message.flat, ks), params, ks


def conceal(cover: Image, message: Image, s: Settings = DEFAULT_SETTINGS) -> Concealed:
    # cheap size check before SIFT and the keystream
    cap = stego.capacity(cover, s.template, s.n_steps, s.dt)
    need = stego.HEADER_BITS + 8 * message.size
    if need > cap:
        raise InsufficientCapacity(need, cap)
    key = keyforge.rawkey_from_image(cover, s.sift_config)
    cipher, params, ks = encrypt(message, key, s)
    payload = stego.StegoPayload(message.width, message.height, params.h1, params.h2, cipher)
    out = stego.embed(cover, payload, s.template, s.n_steps, s.dt)
    return Concealed(out, key, params, ks, payload, cap)


def reveal(stego_img: Image, s: Settings = DEFAULT_SETTINGS,
           key: Optional[keyforge.RawKey] = None) -> Revealed:
    payload = stego.extract(stego_img, s.template, s.n_steps, s.dt)
    if key is None:
        key = keyforge.rawkey_from_image(stego_img, s.sift_config)
    params = keyforge.params_from_key(key, payload.h1, payload.h2)
    ks = chaoscrypt.generate_keystream(params, payload.cipher.size, s.template, s.dt)
    plain = chaoscrypt.xor_transform(payload.cipher, ks)
    if payload.cipher.size:
        msg = Image(plain.reshape(payload.msg_height, payload.msg_width))
    else:
        msg = None
    return Revealed(msg, key, params, ks, payload)
