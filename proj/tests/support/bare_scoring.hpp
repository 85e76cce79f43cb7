#pragma once

#include <algorithm>
#include <string>

#include "ralm/lm.hpp"
#include "ralm/text.hpp"

namespace ralm::testing {

/// NLL of `text` scored by the bare backend in `stride`-token chunks, each
/// conditioned on the whole raw prefix. Slices the raw text directly.
inline double bare_strided_nll(const lm_backend& lm, const std::string& text, std::size_t stride)
{
    const auto toks = lm_tokenize(text);
    double nll = 0.0;
    for (std::size_t begin = 0; begin < toks.size(); begin += stride) {
        const std::size_t end = std::min(toks.size(), begin + stride);
        const std::string ctx = begin == 0 ? "" : text.substr(toks[0].begin, toks[begin - 1].end - toks[0].begin);
        const std::size_t cstart = begin == 0 ? toks[0].begin : toks[begin - 1].end;
        const std::string cont = text.substr(cstart, toks[end - 1].end - cstart);
        nll -= lm.score({ctx, cont}).logprob_sum;
    }
    return nll;
}

}  // namespace ralm::testing
