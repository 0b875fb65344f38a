# -*- coding: utf-8 -*-

import os


def atomic_write(path, data):
    """Write *data* to ``path + '.tmp'`` then rename it to *path*.

    A reader never sees a partially written artifact; an interrupted
    write leaves only the ``.tmp`` file behind.
    """
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = path + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(data)
    os.replace(tmp, path)
    return path
