//! Drive the search through the line-delimited JSON classifier protocol.
//!
//! A stand-in server runs on a loopback port and calls a block "object" when
//! it holds any bright pixel. A real deployment points `--endpoint` at a
//! trained network speaking the same protocol.

use std::io::BufReader;
use std::net::TcpListener;
use std::thread;

use pbaloc::engine::{self, EngineConfig};
use pbaloc::geometry::{Dims, Point};
use pbaloc::oracles::{protocol, Endpoint, ExternalClient, ExternalOracle, Oracle};
use pbaloc::scene::generate_star_scene;

fn main() -> pbaloc::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint: Endpoint = format!("tcp:{}", listener.local_addr()?).parse()?;
    thread::spawn(move || {
        let (stream, _) = listener.accept().expect("client connects");
        let reader = BufReader::new(stream.try_clone().expect("clone stream"));
        protocol::serve(reader, stream, 64, |px, _| {
            Ok(if px.contains(&255) { [0.9, 0.1] } else { [0.1, 0.9] })
        })
    });

    let dims = Dims::new(256, 256)?;
    let scene = generate_star_scene(dims, Point::new(180, 60), 4, 0.0, 1)?;
    let client = ExternalClient::connect(&endpoint)?;
    println!("connected to {endpoint}, server input side {}", client.input_side());

    let mut oracle = ExternalOracle::new(client, &scene);
    let cfg = EngineConfig { rng_seed: 5, block_input_side: 64, max_iterations: 60, ..Default::default() };
    let res = engine::run(dims, &mut oracle, &cfg)?;
    println!(
        "target {:?} estimate {:?} after {} requests ({:?})",
        scene.target_center(),
        res.center,
        oracle.stats().calls,
        res.status
    );
    Ok(())
}
