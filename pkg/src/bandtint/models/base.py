from pydantic import BaseModel as PydanticBaseModel


class BaseModel(PydanticBaseModel):
    model_config = {
        'extra': 'forbid',
        'use_enum_values': True,
        'from_attributes': True,
        'validate_default': True,
    }


class FrozenModel(BaseModel):
    model_config = {
        'frozen': True,
    }
