#pragma once

#include <stdexcept>
#include <string>

namespace imbeval {

// Every failure mode the library reports. The CLI maps these onto exit
// categories: I/O failures exit 4, numerical non-convergence exits 3,
// everything else is input validation and exits 2.
enum class Errc {
    // ingest
    missing_column,
    duplicate_sample_id,
    label_out_of_range,
    empty_selection,
    row_not_stochastic,
    unknown_sample_id,
    ragged_crops,
    duplicate_row,
    invalid_field,
    // splits
    too_few_groups,
    fold_out_of_range,
    // balance
    zero_class_count,
    batch_too_small,
    // metrics
    length_mismatch,
    empty_class,
    empty_matrix,
    degenerate_class,
    // cropper
    crop_too_large,
    non_square_r,
    empty_input,
    // trainer
    epoch_out_of_range,
    dimension_mismatch,
    // meta
    single_class,
    no_convergence,
    missing_class,
    too_few_samples,
    // ensemble
    empty_ensemble,
    shape_mismatch,
    // generic
    invalid_argument,
    io_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    Errc code() const { return code_; }
    const char* name() const { return errc_name(code_); }

    // CLI exit category: 2 validation, 3 non-convergence, 4 I/O.
    int exit_code() const {
        if (code_ == Errc::io_error) return 4;
        if (code_ == Errc::no_convergence) return 3;
        return 2;
    }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace imbeval
