from typing import Tuple, Type

from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class Settings(BaseSettings):
    """
    Tool-level settings and documented numerical defaults.

    Only init arguments and the defaults below are honoured: a run is fully
    described by its configuration file, so the environment is never read.
    """
    # Project metadata
    project_name: str = "gou-ruin"
    project_version: str = "0.1.0"

    # Simulation defaults
    default_step: float = 2.0 ** -8
    default_theta: float = 30.0
    default_t_max: float = 200.0
    default_batch_size: int = 4096

    # Estimation defaults
    median_of_means_blocks: int = 20
    min_ruins_for_fit: int = 10

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    model_config = SettingsConfigDict(case_sensitive=False, extra="ignore")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)


# Global settings instance
settings = Settings()
