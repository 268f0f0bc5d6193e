//! Operator CLI: key management, file encryption, live channels, the
//! attack demos, and the throughput benchmark.
//!
//! Exit codes: 0 success, 2 usage, 3 crypto/handshake failure, 4 I/O.

use std::fs;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::rngs::OsRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use qgstream::codec::{encode_ciphertext_file, parse_ciphertext_file, BlockCodecParams};
use qgstream::elgamal::{
    decode_private_key, decode_public_key, encode_private_key, encode_public_key, keygen,
    keypair_from_exponent, public_key_digest_input, ElGamalKeyPair, ElGamalPublicKey,
};
use qgstream::numtheory::{pl_modulus, PrimeParams};
use qgstream::session::{accept_offer, make_offer, make_offer_any_k, SessionOffer};
use qgstream::wire::{decode_offer_payload, encode_offer_payload, run_initiator, run_responder};
use qgstream::{attacks, bench, Error};

const OFFER_FILE_MAGIC: &[u8; 4] = b"QGSO";
const OFFER_FILE_VERSION: u8 = 0x01;

#[derive(Parser)]
#[command(name = "qgstream", version, about = "Quasigroup stream cipher over Z_p*")]
struct Cli {
    /// Print extra detail to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

static VERBOSE: std::sync::OnceLock<bool> = std::sync::OnceLock::new();

fn vlog(msg: impl AsRef<str>) {
    if VERBOSE.get().copied().unwrap_or(false) {
        eprintln!("{}", msg.as_ref());
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamSet {
    /// p = 2^16 + 1 with alpha 13 (the classical test-vector value;
    /// actually a quadratic residue, so it is recorded unverified) —
    /// too small for real use.
    Test65537,
    /// p = 2^784 + 3 (98-byte blocks)
    P98,
    /// p = 2^1704 + 3 (213-byte blocks)
    P213,
    /// p = 2^2008 + 3 (251-byte blocks)
    P251,
}

impl ParamSet {
    fn prime(self) -> BigUint {
        match self {
            ParamSet::Test65537 => BigUint::from(65537u32),
            ParamSet::P98 => pl_modulus(98),
            ParamSet::P213 => pl_modulus(213),
            ParamSet::P251 => pl_modulus(251),
        }
    }

    /// Distinct prime factors of p - 1 where we actually know them.
    fn order_factors(self) -> Option<Vec<BigUint>> {
        match self {
            ParamSet::Test65537 => Some(vec![BigUint::from(2u32)]),
            _ => None,
        }
    }

    fn default_alpha(self) -> BigUint {
        match self {
            ParamSet::Test65537 => BigUint::from(13u32),
            _ => BigUint::from(2u32),
        }
    }
}

#[derive(Args)]
struct SeedArg {
    /// Seed the randomness for bit-reproducible output.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an ElGamal key pair and write the QGEK key files.
    Keygen {
        #[arg(long, value_enum)]
        params: ParamSet,
        #[arg(long)]
        out_pub: PathBuf,
        #[arg(long)]
        out_priv: PathBuf,
        /// Group element to use as the generator; verified against the
        /// factorization of p - 1 when that is known, recorded as
        /// unverified otherwise.
        #[arg(long, value_parser = parse_biguint)]
        alpha: Option<BigUint>,
        /// Fixed private exponent instead of a random one (demos/tests).
        #[arg(long, value_parser = parse_biguint)]
        exponent: Option<BigUint>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Encrypt a file: writes a session offer plus a QGSD ciphertext file.
    Encrypt {
        /// Recipient public key file.
        #[arg(long = "pub")]
        pub_key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        offer_out: PathBuf,
        /// Leader count; fewer than 3 needs --unsafe-demo.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Allow the breakable configurations k = 1 and k = 2.
        #[arg(long)]
        unsafe_demo: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Decrypt a QGSD ciphertext file using its session offer.
    Decrypt {
        /// Recipient private key file.
        #[arg(long = "priv")]
        priv_key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        offer_in: PathBuf,
    },
    /// Listen for one peer at a time and decrypt its stream.
    Serve {
        /// host:port to bind; port 0 picks a free port (printed to stderr).
        #[arg(long, required_unless_present = "stdio", conflicts_with = "stdio")]
        listen: Option<String>,
        /// Speak the frame protocol over stdin/stdout instead of a socket
        /// (for inetd/ssh-style plumbing); requires --out.
        #[arg(long, requires = "output")]
        stdio: bool,
        #[arg(long = "priv")]
        priv_key: PathBuf,
        /// Write received plaintext here instead of stdout.
        #[arg(long = "out")]
        output: Option<PathBuf>,
        /// Exit after the first session instead of accepting forever.
        #[arg(long)]
        once: bool,
    },
    /// Connect to a listening peer and stream an encrypted file/stdin.
    Connect {
        /// host:port of the peer.
        #[arg(long, required_unless_present = "stdio", conflicts_with = "stdio")]
        peer: Option<String>,
        /// Speak the frame protocol over stdin/stdout instead of a socket;
        /// requires --in.
        #[arg(long, requires = "input")]
        stdio: bool,
        /// Read plaintext from this file instead of stdin.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        unsafe_demo: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run the cryptanalytic demos against the weak configurations.
    Attack {
        /// Known-plaintext key recovery against the real cipher with k = 1.
        #[arg(long, conflicts_with = "k2")]
        k1: bool,
        /// Chosen-plaintext key recovery in the mod-p model with k = 2.
        #[arg(long)]
        k2: bool,
        #[arg(long, value_enum, default_value_t = ParamSet::Test65537)]
        params: ParamSet,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare per-block stream-cipher and ElGamal encryption times.
    Bench {
        #[arg(long, value_enum, default_value_t = ParamSet::P98)]
        params: ParamSet,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        blocks: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn parse_biguint(s: &str) -> Result<BigUint, String> {
    BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| format!("not a decimal integer: {s}"))
}

fn make_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::seed_from_u64(OsRng.next_u64()),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 4,
        Error::InvalidParameter(_) | Error::OutOfDomain(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = VERBOSE.set(cli.verbose);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Keygen {
            params,
            out_pub,
            out_priv,
            alpha,
            exponent,
            seed,
        } => cmd_keygen(params, &out_pub, &out_priv, alpha, exponent, seed.seed),
        Command::Encrypt {
            pub_key,
            input,
            output,
            offer_out,
            k,
            unsafe_demo,
            seed,
        } => cmd_encrypt(&pub_key, &input, &output, &offer_out, k, unsafe_demo, seed.seed),
        Command::Decrypt {
            priv_key,
            input,
            output,
            offer_in,
        } => cmd_decrypt(&priv_key, &input, &output, &offer_in),
        Command::Serve {
            listen,
            stdio,
            priv_key,
            output,
            once,
        } => cmd_serve(listen.as_deref(), stdio, &priv_key, output.as_deref(), once),
        Command::Connect {
            peer,
            stdio,
            input,
            k,
            unsafe_demo,
            seed,
        } => cmd_connect(peer.as_deref(), stdio, input.as_deref(), k, unsafe_demo, seed.seed),
        Command::Attack {
            k1,
            k2,
            params,
            trials,
            seed,
        } => cmd_attack(k1, k2, params, trials, seed),
        Command::Bench {
            params,
            k,
            blocks,
            seed,
        } => cmd_bench(params, k, blocks, seed.seed),
    }
}

fn load_public_key(path: &Path, rng: &mut impl Rng) -> Result<ElGamalPublicKey, Error> {
    decode_public_key(&fs::read(path)?, rng)
}

fn load_private_key(path: &Path, rng: &mut impl Rng) -> Result<ElGamalKeyPair, Error> {
    decode_private_key(&fs::read(path)?, rng)
}

fn fingerprint(public: &ElGamalPublicKey) -> String {
    hex::encode(Sha256::digest(public_key_digest_input(public)))
}

fn cmd_keygen(
    set: ParamSet,
    out_pub: &Path,
    out_priv: &Path,
    alpha: Option<BigUint>,
    exponent: Option<BigUint>,
    seed: Option<u64>,
) -> Result<(), Error> {
    let mut rng = make_rng(seed);
    let alpha = alpha.unwrap_or_else(|| set.default_alpha());
    let params = match set.order_factors() {
        Some(factors) => {
            match PrimeParams::verified(set.prime(), alpha.clone(), factors, &mut rng) {
                Ok(params) => params,
                Err(Error::CannotVerify(reason)) => {
                    eprintln!(
                        "warning: {reason}; the generator is recorded as unverified"
                    );
                    PrimeParams::unverified(set.prime(), alpha, &mut rng)?
                }
                Err(other) => return Err(other),
            }
        }
        None => {
            eprintln!(
                "warning: no factorization of p - 1 for this parameter set; \
                 the generator is recorded as unverified"
            );
            PrimeParams::unverified(set.prime(), alpha, &mut rng)?
        }
    };
    let keypair = match exponent {
        Some(a) => keypair_from_exponent(params, a)?,
        None => keygen(params, &mut rng),
    };
    vlog(format!(
        "p: {} bits, plaintext block: {} bytes, generator verified: {}",
        keypair.public().p().bits(),
        keypair.public().element_width() - 1,
        keypair.public().params().generator_verified(),
    ));
    fs::write(out_pub, encode_public_key(keypair.public()))?;
    fs::write(out_priv, encode_private_key(&keypair))?;
    eprintln!("public key:  {}", out_pub.display());
    eprintln!("private key: {}", out_priv.display());
    println!("fingerprint: {}", fingerprint(keypair.public()));
    Ok(())
}

fn write_offer_file(path: &Path, offer: &SessionOffer) -> Result<(), Error> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(OFFER_FILE_MAGIC);
    bytes.push(OFFER_FILE_VERSION);
    bytes.extend_from_slice(&encode_offer_payload(offer));
    fs::write(path, bytes)?;
    Ok(())
}

fn read_offer_file(path: &Path) -> Result<SessionOffer, Error> {
    let bytes = fs::read(path)?;
    if bytes.len() < 5 || &bytes[..4] != OFFER_FILE_MAGIC {
        return Err(Error::Format("bad offer file magic"));
    }
    if bytes[4] != OFFER_FILE_VERSION {
        return Err(Error::Format("unsupported offer file version"));
    }
    decode_offer_payload(&bytes[5..])
}

fn cmd_encrypt(
    pub_key: &Path,
    input: &Path,
    output: &Path,
    offer_out: &Path,
    k: usize,
    unsafe_demo: bool,
    seed: Option<u64>,
) -> Result<(), Error> {
    let mut rng = make_rng(seed);
    let public = load_public_key(pub_key, &mut rng)?;
    let codec = BlockCodecParams::for_prime(public.p())?;
    vlog(format!(
        "recipient fingerprint {}, k = {k}, block size {} bytes",
        fingerprint(&public),
        codec.l(),
    ));
    let (offer, mut state) = if unsafe_demo {
        make_offer_any_k(&public, k, &mut rng)?
    } else {
        make_offer(&public, k, &mut rng)?
    };
    let plaintext = fs::read(input)?;
    let blocks = codec
        .encode_stream(&plaintext)
        .iter()
        .map(|m| state.encrypt_block(m))
        .collect::<Result<Vec<_>, _>>()?;
    write_offer_file(offer_out, &offer)?;
    fs::write(output, encode_ciphertext_file(&codec, &blocks)?)?;
    eprintln!(
        "encrypted {} bytes into {} blocks of {} bytes",
        plaintext.len(),
        blocks.len(),
        codec.cipher_block_width()
    );
    Ok(())
}

fn cmd_decrypt(
    priv_key: &Path,
    input: &Path,
    output: &Path,
    offer_in: &Path,
) -> Result<(), Error> {
    let mut rng = make_rng(None);
    let keypair = load_private_key(priv_key, &mut rng)?;
    let codec = BlockCodecParams::for_prime(keypair.public().p())?;
    let offer = read_offer_file(offer_in)?;
    vlog(format!("offer carries k = {} leaders", offer.k()));
    let mut state = accept_offer(&keypair, &offer)?;
    let blocks = parse_ciphertext_file(&codec, &fs::read(input)?)?;
    let mut decoded = Vec::with_capacity(blocks.len());
    for (index, c) in blocks.iter().enumerate() {
        let m = state.decrypt_block(c).map_err(|_| Error::CorruptBlock {
            index: index as u64,
        })?;
        decoded.push(m);
    }
    let plaintext = codec.decode_stream(&decoded)?;
    fs::write(output, &plaintext)?;
    eprintln!("decrypted {} blocks into {} bytes", blocks.len(), plaintext.len());
    Ok(())
}

/// Frame transport on stdin/stdout, for running a session through pipes
/// (inetd/ssh-style plumbing).
struct StdioTransport {
    stdin: io::Stdin,
    stdout: io::Stdout,
}

impl StdioTransport {
    fn new() -> Self {
        StdioTransport {
            stdin: io::stdin(),
            stdout: io::stdout(),
        }
    }
}

impl Read for StdioTransport {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.stdin.read(buf)
    }
}

impl Write for StdioTransport {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.stdout.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.stdout.flush()
    }
}

fn cmd_serve(
    listen: Option<&str>,
    stdio: bool,
    priv_key: &Path,
    output: Option<&Path>,
    once: bool,
) -> Result<(), Error> {
    let mut rng = make_rng(None);
    let keypair = load_private_key(priv_key, &mut rng)?;

    if stdio {
        // clap enforces --out here; stdout is the frame transport
        let path = output.expect("--stdio requires --out");
        let mut transport = StdioTransport::new();
        let mut file = fs::File::create(path)?;
        let summary = run_responder(&mut transport, &keypair, &mut file)?;
        eprintln!(
            "received {} bytes in {} blocks",
            summary.plaintext_bytes, summary.blocks
        );
        return Ok(());
    }

    let listener = TcpListener::bind(listen.expect("clap enforces --listen"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    loop {
        let (mut conn, peer) = listener.accept()?;
        eprintln!("session with {peer}");
        let outcome = serve_one(&mut conn, &keypair, output);
        match &outcome {
            Ok(summary) => eprintln!(
                "received {} bytes in {} blocks",
                summary.plaintext_bytes, summary.blocks
            ),
            Err(err) => eprintln!("session failed: {err}"),
        }
        if once {
            return outcome.map(|_| ());
        }
    }
}

fn serve_one(
    conn: &mut TcpStream,
    keypair: &ElGamalKeyPair,
    output: Option<&Path>,
) -> Result<qgstream::wire::SessionSummary, Error> {
    match output {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            run_responder(conn, keypair, &mut file)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            run_responder(conn, keypair, &mut lock)
        }
    }
}

fn cmd_connect(
    peer: Option<&str>,
    stdio: bool,
    input: Option<&Path>,
    k: usize,
    unsafe_demo: bool,
    seed: Option<u64>,
) -> Result<(), Error> {
    if k < 3 && !unsafe_demo {
        return Err(Error::InvalidParameter("k < 3 requires --unsafe-demo"));
    }
    let mut rng = make_rng(seed);

    let summary = if stdio {
        // clap enforces --in here; stdin is the frame transport
        let mut file = fs::File::open(input.expect("--stdio requires --in"))?;
        let mut transport = StdioTransport::new();
        run_session(&mut transport, k, unsafe_demo, &mut file, &mut rng)?
    } else {
        let mut conn = TcpStream::connect(peer.expect("clap enforces --peer"))?;
        match input {
            Some(path) => {
                let mut file = fs::File::open(path)?;
                run_session(&mut conn, k, unsafe_demo, &mut file, &mut rng)?
            }
            None => {
                let stdin = io::stdin();
                let mut lock = stdin.lock();
                run_session(&mut conn, k, unsafe_demo, &mut lock, &mut rng)?
            }
        }
    };
    eprintln!(
        "sent {} bytes in {} blocks",
        summary.plaintext_bytes, summary.blocks
    );
    Ok(())
}

fn run_session<T: Read + Write>(
    conn: &mut T,
    k: usize,
    unsafe_demo: bool,
    source: &mut impl Read,
    rng: &mut impl Rng,
) -> Result<qgstream::wire::SessionSummary, Error> {
    if unsafe_demo {
        qgstream::wire::run_initiator_any_k(conn, k, source, rng)
    } else {
        run_initiator(conn, k, source, rng)
    }
}

fn cmd_attack(k1: bool, k2: bool, set: ParamSet, trials: u64, seed: u64) -> Result<(), Error> {
    if k1 == k2 {
        return Err(Error::InvalidParameter("pick exactly one of --k1 / --k2"));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be positive"));
    }
    let p = set.prime();
    let mut successes = 0u64;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for i in 0..trials {
        let trial_seed = seed.wrapping_add(i);
        let trial = if k1 {
            attacks::run_k1_trial(&p, trial_seed)
        } else {
            attacks::run_k2_trial(&p, trial_seed)
        };
        successes += trial.success as u64;
        writeln!(
            out,
            "seed={} p_bits={} success={} recovered_k={} time_us={}",
            trial.seed,
            trial.p_bits,
            trial.success,
            trial
                .recovered_key
                .map(|k| k.to_string())
                .unwrap_or_else(|| "-".into()),
            trial.elapsed.as_micros()
        )?;
    }
    writeln!(
        out,
        "{}: {successes}/{trials} trials succeeded",
        if k1 { "k1" } else { "k2" }
    )?;
    if successes == trials {
        Ok(())
    } else {
        Err(Error::AttackFailed("not every trial recovered the key"))
    }
}

fn cmd_bench(set: ParamSet, k: usize, blocks: u64, seed: Option<u64>) -> Result<(), Error> {
    if blocks == 0 {
        return Err(Error::InvalidParameter("block count must be positive"));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive"));
    }
    let mut rng = make_rng(seed);
    // Generator status is irrelevant to throughput.
    let params = PrimeParams::unverified(set.prime(), set.default_alpha(), &mut rng)?;
    let report = bench::run(params, k, blocks, &mut rng)?;
    println!(
        "p bits: {}  k: {}  blocks: {}",
        report.p_bits, report.k, report.blocks
    );
    println!(
        "stream per block:  {:>12.3} us",
        report.stream_per_block.as_secs_f64() * 1e6
    );
    println!(
        "elgamal per block: {:>12.3} us",
        report.elgamal_per_block.as_secs_f64() * 1e6
    );
    println!("ratio (elgamal/stream): {:.1}", report.ratio());
    Ok(())
}
