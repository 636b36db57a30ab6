//! The chat bot against a local stand-in for the Bot API: one queued
//! message, one reply, and a redelivery that is not answered twice.

use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use tiny_http::{Response, Server};
use verity::claims::Strategy;
use verity::gateway::bot::{Bot, TelegramApi};
use verity::gateway::config::BotConfig;
use verity::judge::Judge;
use verity::provider::{Fixtures, MockModel};

const TOKEN: &str = "42:example-token";

fn main() {
    let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
    let base = format!("http://{}", server.server_addr().to_ip().unwrap());
    let sent = Arc::new(Mutex::new(Vec::<Value>::new()));
    {
        let (server, sent) = (server.clone(), sent.clone());
        std::thread::spawn(move || {
            for mut request in server.incoming_requests() {
                let body = if request.url().contains("/getUpdates") {
                    json!({"ok": true, "result": [
                        {"update_id": 10, "message": {"chat": {"id": 7}, "text": "Bats are blind."}}
                    ]})
                } else {
                    let mut raw = String::new();
                    request.as_reader().read_to_string(&mut raw).unwrap();
                    sent.lock().unwrap().push(serde_json::from_str(&raw).unwrap());
                    json!({"ok": true, "result": {}})
                };
                let _ = request.respond(Response::from_string(body.to_string()));
            }
        });
    }

    let fixtures = Fixtures::default().answer(
        "Bats are blind.",
        "Veracity score: 0% (False), False Part: blind, Reason: Bats can see.",
    );
    let judge = Judge::new(Strategy::FewShot, Arc::new(MockModel::new(&fixtures)), "mock");
    let config = BotConfig {
        api_base: base,
        poll_timeout_secs: 0,
        ..BotConfig::default()
    };
    let mut bot = Bot::new(TelegramApi::new(&config, TOKEN), judge, &config, 2);

    // The stub ignores the offset, so the second poll redelivers update 10.
    for _ in 0..2 {
        bot.poll_once().expect("poll");
    }
    for message in sent.lock().unwrap().iter() {
        println!("to chat {}:\n{}\n", message["chat_id"], message["text"].as_str().unwrap_or(""));
    }
    println!("{:?}", bot.stats());
}
