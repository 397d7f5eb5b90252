"""Network module — dual-branch denoiser, garment encoder and latent codec."""

from posetryon.network.codec import (
    LatentCodec,
    decode_latent,
    encode_latent,
    fit_codec,
    mask_to_latent,
)
from posetryon.network.denoiser import DenoiseConditions, TryOnDenoiser
from posetryon.network.garment import GarmentEncoder, embed_garment
from posetryon.network.unet import GarmentUNet, MainUNet

__all__ = [
    "DenoiseConditions",
    "GarmentEncoder",
    "GarmentUNet",
    "LatentCodec",
    "MainUNet",
    "TryOnDenoiser",
    "decode_latent",
    "embed_garment",
    "encode_latent",
    "fit_codec",
    "mask_to_latent",
]
