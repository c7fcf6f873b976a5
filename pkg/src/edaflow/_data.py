import json
from functools import lru_cache
from importlib import resources


def data_path(*parts):
    p = resources.files("edaflow").joinpath("data")
    for part in parts:
        p = p.joinpath(part)
    return p


@lru_cache(maxsize=None)
def load_json(name):
    return json.loads(data_path(name).read_text("utf-8"))
