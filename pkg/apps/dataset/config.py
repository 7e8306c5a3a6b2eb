import math

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SyntheticConfig(BaseModel):
    """
    # SyntheticConfig
    Planted-cluster corpus. Users and items sit near one of `n_clusters` centers in a
    `latent_dim` space; each user's sequence is drawn without replacement from a
    softmax over latent dot products at `temperature`. Lengths follow a discrete
    power law with exponent `length_exponent`, truncated to [min_length, max_length].
    """

    model_config = ConfigDict(extra="forbid")

    n_users: int = Field(2000, ge=1)
    n_items: int = Field(500, ge=1)
    n_clusters: int = Field(4, ge=2)
    latent_dim: int = Field(8, ge=1)
    min_length: int = Field(2, ge=1)
    max_length: int = Field(50, ge=1)
    length_exponent: float = Field(1.5, ge=0.0)
    temperature: float = Field(0.5, gt=0.0)
    cluster_scale: float = Field(2.0, gt=0.0)
    user_spread: float = Field(0.3, ge=0.0)
    item_spread: float = Field(0.3, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def length_range(self):
        if self.max_length < self.min_length:
            raise ValueError(
                f"max_length ({self.max_length}) is below min_length ({self.min_length})"
            )
        if math.isnan(self.temperature):
            raise ValueError("temperature must be a number")
        return self
