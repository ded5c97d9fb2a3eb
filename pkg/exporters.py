"""
Exporters - Gravação dos resultados em disco
CSV com pandas (cabeçalho, ordem de colunas fixa e formato numérico fixo, para que execuções
repetidas gerem arquivos idênticos) e heatmaps PGM 8 bits com Pillow.
"""

import json
import os

import numpy as np
import pandas as pd
from PIL import Image

from ris_logger import M, log_data

CSV_FLOAT_FORMAT = '%.10g'


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(df: pd.DataFrame, path, float_format=CSV_FLOAT_FORMAT):
    df.to_csv(path, index=False, float_format=float_format, na_rep='nan', lineterminator='\n')
    log_data(M.CLI, "CSV gravado", os.path.basename(str(path)), linhas=len(df))
    return path


def write_json(data, path):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write('\n')
    log_data(M.CLI, "JSON gravado", os.path.basename(str(path)))
    return path


def normalize_to_uint8(values):
    """Normalização min-max para 0..255; NaN vira 0 e um raster constante vira 255."""
    arr = np.asarray(values, dtype=float)
    finite = np.isfinite(arr)
    out = np.zeros(arr.shape, dtype=np.uint8)
    if not finite.any():
        return out
    lo = float(arr[finite].min())
    hi = float(arr[finite].max())
    if hi > lo:
        scaled = np.round((arr[finite] - lo) / (hi - lo) * 255.0)
        out[finite] = scaled.astype(np.uint8)
    else:
        out[finite] = 255
    return out


def write_pgm(values, path):
    """Grava um raster 2-D como PGM binário (P5), linha 0 no topo."""
    pixels = normalize_to_uint8(np.atleast_2d(values))
    Image.fromarray(pixels).save(path, format='PPM')
    log_data(M.CLI, "PGM gravado", os.path.basename(str(path)),
             dimensoes=f"{pixels.shape[0]}x{pixels.shape[1]}")
    return path


# ============================================
# FORMATOS POR RESULTADO
# ============================================

def field_map_frame(fmap):
    """u_index,v_index,re,im,mag_db em ordem row-major."""
    ii, jj = np.meshgrid(np.arange(fmap.nu), np.arange(fmap.nv), indexing='ij')
    values = fmap.values.reshape(-1)
    return pd.DataFrame({
        'u_index': ii.reshape(-1),
        'v_index': jj.reshape(-1),
        're': values.real,
        'im': values.imag,
        'mag_db': fmap.magnitude_db().reshape(-1),
    })


def write_field_map(fmap, csv_path, pgm_path=None):
    write_csv(field_map_frame(fmap), csv_path)
    if pgm_path:
        write_pgm(fmap.magnitude_db(), pgm_path)


def ber_frame(result):
    return pd.DataFrame(list(result.records), columns=['index_p', 'psi_deg', 'ber'])


def write_ber_sweep(result, csv_path, pgm_path=None):
    write_csv(ber_frame(result), csv_path)
    if pgm_path:
        write_pgm(result.matrix, pgm_path)


def write_cell_model(df: pd.DataFrame, path):
    return write_csv(df[['voltage', 'amplitude_db', 'phase_deg']], path)
