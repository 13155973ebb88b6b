"""
Toolkit configuration using Pydantic settings
"""
from pathlib import Path
from typing import Tuple, Type

from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    # App settings
    APP_NAME: str = "greduce"
    VERSION: str = "1.0.0"

    # Document formats
    TRACE_FORMAT_VERSION: str = "greduce-trace/1"
    REPORT_FORMAT_VERSION: str = "greduce-report/1"
    LABELING_FORMAT_VERSION: str = "greduce-labeling/1"

    # Logging
    LOG_LEVEL: str = "WARNING"

    # Reduction
    DEFAULT_TIMEOUT_SECONDS: float = 3600.0
    MAX_BYPASS_CASCADE: int = 64
    POWERSET_UNIT_CEILING: int = 20
    CACHE_ENABLED: bool = True
    DEFAULT_REALIGN_SEED: int = 0

    # Property oracles
    SIMILARITY_THRESHOLD: float = 0.8

    # Bundled cases
    FIXTURES_DIR: Path = Path(__file__).resolve().parent.parent / "fixtures"
    EXPR_UNCHECKED_IDENTIFIERS: bool = False

    model_config = SettingsConfigDict(case_sensitive=True, frozen=True)

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # Explicit configuration only: no environment, no .env file
        return (init_settings,)


settings = Settings()
