from .dicom import DicomSlice, read_dicom_slice, write_dicom_slice
from .metaimage import read_metaimage, write_metaimage
from .nifti import read_nifti, write_nifti

__all__ = [
    "DicomSlice",
    "read_dicom_slice",
    "write_dicom_slice",
    "read_metaimage",
    "write_metaimage",
    "read_nifti",
    "write_nifti",
]
