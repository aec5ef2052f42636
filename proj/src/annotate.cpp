#include "eiu/annotate.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "eiu/errors.hpp"

namespace eiu {

namespace {

std::string normalize(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string check_label(const std::string& label, const std::vector<std::string>& vocabulary) {
    const std::string norm = normalize(label);
    for (const auto& v : vocabulary) {
        if (v == norm) return norm;
    }
    throw DataError("label \"" + label + "\" outside the vocabulary");
}

}  // namespace

VoteResult majority_vote(const AnnotationTriple& triple,
                         const std::vector<std::string>& vocabulary) {
    const std::string a = check_label(triple.labels[0], vocabulary);
    const std::string b = check_label(triple.labels[1], vocabulary);
    const std::string c = check_label(triple.labels[2], vocabulary);

    VoteResult r;
    if (a == b || a == c) {
        r.label = a;
    } else if (b == c) {
        r.label = b;
    } else {
        r.no_majority = true;
        if (triple.expert.has_value()) r.label = check_label(*triple.expert, vocabulary);
    }
    return r;
}

KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
    if (counts.empty() || counts[0].empty()) {
        throw ContractError("fleiss_kappa: empty counts matrix");
    }
    const std::size_t n_items = counts.size();
    const std::size_t n_cats = counts[0].size();

    std::size_t raters = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
        if (counts[i].size() != n_cats) {
            throw ContractError("fleiss_kappa: ragged counts matrix at item " + std::to_string(i));
        }
        std::size_t row = 0;
        for (auto c : counts[i]) row += c;
        if (i == 0) {
            raters = row;
        } else if (row != raters) {
            throw ContractError("fleiss_kappa: item " + std::to_string(i) + " has " +
                                std::to_string(row) + " ratings, expected " +
                                std::to_string(raters));
        }
    }
    if (raters < 2) throw ContractError("fleiss_kappa: needs at least 2 raters per item");

    KappaResult r;
    r.items = n_items;
    r.raters = raters;

    const double rr = static_cast<double>(raters);
    double p_bar = 0.0;
    std::vector<double> col(n_cats, 0.0);
    for (const auto& row : counts) {
        double sq = 0.0;
        for (std::size_t j = 0; j < n_cats; ++j) {
            sq += static_cast<double>(row[j]) * static_cast<double>(row[j]);
            col[j] += static_cast<double>(row[j]);
        }
        p_bar += (sq - rr) / (rr * (rr - 1.0));
    }
    r.p_bar = p_bar / static_cast<double>(n_items);

    double p_e = 0.0;
    for (double c : col) {
        const double pj = c / (static_cast<double>(n_items) * rr);
        p_e += pj * pj;
    }
    r.p_e = p_e;

    if (p_e == 1.0) {
        // only reachable when every rating lands in a single category
        r.kappa = 1.0;
        r.degenerate = true;
    } else {
        r.kappa = (r.p_bar - p_e) / (1.0 - p_e);
    }
    return r;
}

std::vector<AnnotationTriple> parse_triples_csv(const std::string& bytes) {
    std::vector<AnnotationTriple> out;
    std::istringstream in(bytes);
    std::string line;
    std::size_t lineno = 0;
    bool expect_expert = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (lineno == 1) {
            if (fields.size() != 5 && fields.size() != 6) {
                throw ParseError("triples csv: expected header "
                                 "Dia_No,Utt_No,Label1,Label2,Label3[,Expert]");
            }
            expect_expert = fields.size() == 6;
            continue;
        }
        if (fields.size() != (expect_expert ? 6u : 5u)) {
            throw DataError("triples csv line " + std::to_string(lineno) + ": expected " +
                            std::to_string(expect_expert ? 6 : 5) + " fields, got " +
                            std::to_string(fields.size()));
        }
        AnnotationTriple t;
        try {
            t.dia_no = std::stoll(fields[0]);
            t.utt_no = std::stoll(fields[1]);
        } catch (const std::exception&) {
            throw DataError("triples csv line " + std::to_string(lineno) + ": bad dia/utt number");
        }
        t.labels = {fields[2], fields[3], fields[4]};
        if (expect_expert && !normalize(fields[5]).empty()) t.expert = fields[5];
        out.push_back(std::move(t));
    }
    if (lineno == 0) throw ParseError("triples csv: empty input");
    return out;
}

std::vector<std::vector<std::size_t>> triples_to_counts(
    const std::vector<AnnotationTriple>& triples, const std::vector<std::string>& vocabulary) {
    std::vector<std::vector<std::size_t>> counts(triples.size(),
                                                 std::vector<std::size_t>(vocabulary.size(), 0));
    for (std::size_t i = 0; i < triples.size(); ++i) {
        for (const auto& label : triples[i].labels) {
            const std::string norm = check_label(label, vocabulary);
            for (std::size_t j = 0; j < vocabulary.size(); ++j) {
                if (vocabulary[j] == norm) {
                    counts[i][j] += 1;
                    break;
                }
            }
        }
    }
    return counts;
}

std::string kappa_report_csv(const KappaResult& r) {
    std::ostringstream os;
    os << "kappa,p_bar,p_e,items,raters,degenerate\n";
    os << r.kappa << "," << r.p_bar << "," << r.p_e << "," << r.items << "," << r.raters << ","
       << (r.degenerate ? 1 : 0) << "\n";
    return os.str();
}

std::string kappa_report_text(const KappaResult& r) {
    std::ostringstream os;
    os << "fleiss kappa = " << r.kappa << (r.degenerate ? " (degenerate: single category)" : "")
       << "\n"
       << "observed agreement P_bar = " << r.p_bar << "\n"
       << "expected agreement P_e   = " << r.p_e << "\n"
       << "items = " << r.items << ", raters = " << r.raters << "\n";
    return os.str();
}

}  // namespace eiu
