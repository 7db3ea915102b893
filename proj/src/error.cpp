#include "imbeval/error.hpp"

namespace imbeval {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::missing_column: return "MissingColumn";
        case Errc::duplicate_sample_id: return "DuplicateSampleId";
        case Errc::label_out_of_range: return "LabelOutOfRange";
        case Errc::empty_selection: return "EmptySelection";
        case Errc::row_not_stochastic: return "RowNotStochastic";
        case Errc::unknown_sample_id: return "UnknownSampleId";
        case Errc::ragged_crops: return "RaggedCrops";
        case Errc::duplicate_row: return "DuplicateRow";
        case Errc::invalid_field: return "InvalidField";
        case Errc::too_few_groups: return "TooFewGroups";
        case Errc::fold_out_of_range: return "FoldOutOfRange";
        case Errc::zero_class_count: return "ZeroClassCount";
        case Errc::batch_too_small: return "BatchTooSmall";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::empty_class: return "EmptyClass";
        case Errc::empty_matrix: return "EmptyMatrix";
        case Errc::degenerate_class: return "DegenerateClass";
        case Errc::crop_too_large: return "CropTooLarge";
        case Errc::non_square_r: return "NonSquareR";
        case Errc::empty_input: return "EmptyInput";
        case Errc::epoch_out_of_range: return "EpochOutOfRange";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::single_class: return "SingleClass";
        case Errc::no_convergence: return "NoConvergence";
        case Errc::missing_class: return "MissingClass";
        case Errc::too_few_samples: return "TooFewSamples";
        case Errc::empty_ensemble: return "EmptyEnsemble";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

}  // namespace imbeval
