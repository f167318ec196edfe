from .app import create_app
from .config import AdapterConfig, EndpointSetting, config_from_dict, load_config
from .fixtures import FixtureStore, request_key

__version__ = "0.1.0"
