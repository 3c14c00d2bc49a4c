from pydantic_settings import BaseSettings, SettingsConfigDict

from bandtint import constants


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix='BANDTINT_',
        case_sensitive=False,
        use_enum_values=False,
    )

    log: constants.LogLevel = constants.LogLevel.INFO
    """
    Verbosity of the JSON records written to standard error.
    """
