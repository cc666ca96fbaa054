#pragma once

#include <cstdint>
#include <string>

namespace gnn::synth {

// Generators that write benchmark-shaped datasets in the loader formats.
// They stand in for the published downloads, which are not reachable
// from an offline checkout; shapes match the originals and the label
// structure is calibrated so the reference architectures land in the
// published accuracy ranges.

struct CitationOptions {
    int64_t n_nodes = 2708;
    int64_t n_features = 1433;
    int n_classes = 7;
    double edges_per_node = 3.0;   // each endpoint also gets the reverse edge
    double homophily = 0.59;       // probability an edge stays within class
    int words_per_node = 18;
    double topic_word_prob = 0.30; // probability a word comes from the class topic
    int topic_width = 120;         // dims owned by each class topic
};

// Writes edges.tsv / features.csv / labels.csv.
void write_citation_like(const std::string& dir, uint64_t seed,
                         const CitationOptions& opts = {});

struct TuOptions {
    int n_graphs = 188;
    int n_classes = 2;
    double mean_order = 17.9;
    int n_node_labels = 7;
    double label_signal = 0.40;  // weight of the class-specific label mixture
    double ring_signal = 0.75;   // probability the class motif ring is present
};

// Writes <name>_A.txt, _graph_indicator.txt, _graph_labels.txt,
// _node_labels.txt.
void write_tu_like(const std::string& dir, const std::string& name, uint64_t seed,
                   const TuOptions& opts = {});

struct Qm9Options {
    int64_t n_molecules = 10000;
    double noise = 0.35;  // stddev of target noise relative to signal spread
};

// Writes qm9.sdf (V2000 records joined by $$$$) and targets.csv.
void write_qm9_like(const std::string& dir, uint64_t seed, const Qm9Options& opts = {});

}  // namespace gnn::synth
