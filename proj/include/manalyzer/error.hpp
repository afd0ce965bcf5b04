#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace manalyzer {

// Every failure the engine reports carries one of these codes. The CLI maps
// them onto exit codes (validation -> 2, everything else -> 3).
enum class Errc {
    precondition,
    transport_failure,
    provider_refusal,
    empty_response,
    script_miss,
    duplicate_key,
    unparseable_reply,
    empty_direction,
    api_unreachable,
    malformed_api_response,
    not_downloadable,
    checksum_mismatch,
    schema_violation,
    dangling_image_reference,
    review_failure,
    length_mismatch,
    unparseable_list,
    no_table_found,
    conversion_failure,
    summary_failure,
    header_mismatch,
    missing_explanation_block,
    unparseable_table,
    unparseable_numeric,
    checker_failure,
    no_valid_steps,
    degenerate_step,
    empty_gold,
    config_invalid,
    refuse_resume,
    corrupt_manifest,
    stage_failure,
    io_error,
};

inline std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::precondition: return "precondition";
        case Errc::transport_failure: return "transport-failure";
        case Errc::provider_refusal: return "provider-refusal";
        case Errc::empty_response: return "empty-response";
        case Errc::script_miss: return "script-miss";
        case Errc::duplicate_key: return "duplicate-key";
        case Errc::unparseable_reply: return "unparseable-reply";
        case Errc::empty_direction: return "empty-direction";
        case Errc::api_unreachable: return "api-unreachable";
        case Errc::malformed_api_response: return "malformed-api-response";
        case Errc::not_downloadable: return "not-downloadable";
        case Errc::checksum_mismatch: return "checksum-mismatch";
        case Errc::schema_violation: return "schema-violation";
        case Errc::dangling_image_reference: return "dangling-image-reference";
        case Errc::review_failure: return "review-failure";
        case Errc::length_mismatch: return "length-mismatch";
        case Errc::unparseable_list: return "unparseable-list";
        case Errc::no_table_found: return "no-table-found";
        case Errc::conversion_failure: return "conversion-failure";
        case Errc::summary_failure: return "summary-failure";
        case Errc::header_mismatch: return "header-mismatch";
        case Errc::missing_explanation_block: return "missing-explanation-block";
        case Errc::unparseable_table: return "unparseable-table";
        case Errc::unparseable_numeric: return "unparseable-numeric";
        case Errc::checker_failure: return "checker-failure";
        case Errc::no_valid_steps: return "no-valid-steps";
        case Errc::degenerate_step: return "degenerate-step";
        case Errc::empty_gold: return "empty-gold";
        case Errc::config_invalid: return "config-invalid";
        case Errc::refuse_resume: return "refuse-resume";
        case Errc::corrupt_manifest: return "corrupt-manifest";
        case Errc::stage_failure: return "stage-failure";
        case Errc::io_error: return "io-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

    // Validation-class errors are caused by bad input rather than a failing stage.
    bool is_validation() const noexcept {
        switch (code_) {
            case Errc::precondition:
            case Errc::empty_direction:
            case Errc::schema_violation:
            case Errc::dangling_image_reference:
            case Errc::config_invalid:
            case Errc::refuse_resume:
            case Errc::corrupt_manifest:
            case Errc::duplicate_key:
                return true;
            default:
                return false;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(Errc::precondition, message);
}

}  // namespace manalyzer
