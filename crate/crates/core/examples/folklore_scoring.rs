//! Dictionary classification of motif descriptions and group scores.

use ancestral_attention::folklore::{classify_motif, score_catalog, MotifCatalog, MotifEntry, TermDictionary};

fn main() {
    let dict = TermDictionary::parse(include_str!("../data/seed_terms.txt")).unwrap();
    let motifs = [
        ("ga", "The weather spirit withholds rain"),
        ("ga", "A trickster hare steals fire"),
        ("gb", "A natural disaster floods the village"),
        ("gb", "Natural causes of a disaster"),
    ];
    for (_, d) in motifs {
        println!("{:<40} {}", d, classify_motif(d, &dict));
    }

    let entries = motifs
        .iter()
        .enumerate()
        .map(|(i, (g, d))| MotifEntry { group_id: g.to_string(), motif_id: i.to_string(), description: d.to_string() })
        .collect();
    for s in score_catalog(&MotifCatalog::new(entries).unwrap(), &dict).unwrap() {
        println!("{}: {}/{} -> {:.4}", s.group_id, s.env_motifs, s.total_motifs, s.score);
    }
}
