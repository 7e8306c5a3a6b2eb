from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class RetrievalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    measure: Literal["cosine", "inner_product", "euclidean", "jaccard"] = "cosine"
    stored_neighbors: int = Field(10, ge=0)
    threshold: Optional[float] = None
