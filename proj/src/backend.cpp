#include "nbce/backend.hpp"

namespace nbce {

std::vector<ScoreResult> Backend::score_batch(const std::vector<ScoreRequest> & reqs) {
    std::vector<ScoreResult> out;
    out.reserve(reqs.size());
    for (const auto & req : reqs) {
        ScoreResult slot;
        try {
            slot.response = score_next_token(req);
        } catch (const context_overflow_error & e) {
            slot.error = ScoreErrorKind::context_overflow;
            slot.message = e.what();
        } catch (const truncated_vocab_error & e) {
            slot.error = ScoreErrorKind::truncated_vocab;
            slot.message = e.what();
        } catch (const backend_unavailable_error & e) {
            slot.error = ScoreErrorKind::backend_unavailable;
            slot.message = e.what();
        }
        out.push_back(std::move(slot));
    }
    return out;
}

void raise_score_error(const ScoreResult & result) {
    switch (result.error) {
        case ScoreErrorKind::context_overflow:    throw context_overflow_error(result.message);
        case ScoreErrorKind::truncated_vocab:     throw truncated_vocab_error(result.message);
        case ScoreErrorKind::backend_unavailable: throw backend_unavailable_error(result.message);
        case ScoreErrorKind::none:                break;
    }
    throw nbce_error("raise_score_error called on a successful result");
}

}  // namespace nbce
