use aigcbias::corpus::{corpus_stats, load_articles, pair_articles, Origin};

use crate::args::IngestArgs;
use crate::CliResult;

pub fn run(args: IngestArgs) -> CliResult {
    let reference = load_articles(&args.reference, Origin::Reference)?;
    let stats = corpus_stats(&reference)?;
    println!(
        "{}: {} reference articles, mean {:.1} words",
        args.reference.display(),
        stats.article_count,
        stats.mean_word_count
    );
    for path in &args.generated {
        let generated = load_articles(path, Origin::Generated)?;
        let stats = corpus_stats(&generated)?;
        let pairing = pair_articles(&reference, &generated);
        println!(
            "{}: {} generated articles, mean {:.1} words, {} paired, {} without reference",
            path.display(),
            stats.article_count,
            stats.mean_word_count,
            pairing.pairs.len(),
            pairing.orphans.len()
        );
    }
    Ok(())
}
