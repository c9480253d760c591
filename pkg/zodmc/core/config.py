from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    database_url: str = Field(default="sqlite:///zodmc.db", alias="DATABASE_URL")

    workers: int = Field(default=1, ge=1, alias="ZODMC_WORKERS")
    output_dir: str = Field(default="results", alias="ZODMC_OUTPUT_DIR")
    seed: int = Field(default=0, ge=0, alias="ZODMC_SEED")
    log_level: str = Field(default="INFO", alias="ZODMC_LOG_LEVEL")

    # 기각 샘플러 기본값
    rgo_batch_size: int = Field(default=256, ge=1, alias="ZODMC_RGO_BATCH_SIZE")
    max_proposals: int = Field(default=1_000_000, ge=1, alias="ZODMC_MAX_PROPOSALS")

    debug: bool = Field(default=False, alias="DEBUG")

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()
